#include <doctest.h>

TEST_SUITE("delay_sde") {}
