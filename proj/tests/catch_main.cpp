// Builds the Catch2 amalgamated implementation (with its default main) once;
// every test binary links against this object library.
#include <catch2/catch_amalgamated.cpp>
