#include <doctest.h>

TEST_SUITE("regression") {}
