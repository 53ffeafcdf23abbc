#include <doctest.h>

TEST_SUITE("market_model") {}
