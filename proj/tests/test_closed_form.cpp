#include <doctest.h>

TEST_SUITE("closed_form") {}
