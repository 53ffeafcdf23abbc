#include <doctest.h>

TEST_SUITE("verify") {}
