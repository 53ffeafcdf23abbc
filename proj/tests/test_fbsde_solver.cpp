#include <doctest.h>

TEST_SUITE("fbsde_solver") {}
