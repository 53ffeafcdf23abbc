#include <doctest.h>

TEST_SUITE("martingale_method") {}
