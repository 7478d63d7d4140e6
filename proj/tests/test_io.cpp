#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "dpw/io.hpp"

using namespace dpw;

TEST_CASE("config parsing and validation") {
    auto c = parseConfig(R"({
        "command": "convergence",
        "family": {"branch": "spherical", "coupling": [0.8, 0.3], "kappa": 0.4, "nu": 0.5},
        "grid": {"L": 128, "N": 32},
        "ladders": {"t": [0.003, 0.01], "z": [0.1, 0.2]},
        "mode": "immersion",
        "prefix": "conv"
    })");
    CHECK(c.command == "convergence");
    CHECK(c.family.coupling == cplx(0.8, 0.3));
    CHECK(c.family.nu == cplx(0.5, 0.0));
    CHECK(c.pipeline.grid.L == 128);
    CHECK(c.t_ladder.size() == 2);
    CHECK(c.mode == "immersion");
    CHECK(c.prefix == "conv");

    // defaults survive an almost-empty config
    auto d = parseConfig(R"({"command": "monodromy"})");
    CHECK(d.t == 0.01);
    CHECK(d.pipeline.grid.L == 256);
    CHECK(d.mesh.n_r == 48);
}

TEST_CASE("config rejection") {
    CHECK_THROWS_AS(parseConfig("not json"), Error);
    CHECK_THROWS_AS(parseConfig(R"({"command": "fly"})"), Error);
    CHECK_THROWS_AS(parseConfig(R"({"command": "delaunay", "tt": 1})"), Error);
    CHECK_THROWS_AS(parseConfig(R"({"command": "delaunay", "family": {"branche": 1}})"), Error);
    // weight beyond the cylinder bound
    CHECK_THROWS_AS(parseConfig(R"({"command": "delaunay", "t": 0.2})"), Error);
    CHECK_THROWS_AS(
        parseConfig(R"({"command": "convergence", "ladders": {"t": [0.2], "z": [0.1]}})"),
        Error);
    // convergence without ladders
    CHECK_THROWS_AS(parseConfig(R"({"command": "convergence"})"), Error);
    // mesh radii out of order
    CHECK_THROWS_AS(
        parseConfig(R"({"command": "embeddedness", "mesh": {"eps": 0.1, "eps_prime": [0.2]}})"),
        Error);
    CHECK_THROWS_AS(parseConfig(R"({"command": "delaunay", "mode": "sideways"})"), Error);
    CHECK_THROWS_AS(parseConfig(R"({"command": "delaunay", "family": {"coupling": [1]}})"),
                    Error);
}

TEST_CASE("csv rows") {
    std::ostringstream out;
    writeCsvRow(out, {"t", "abs_z", "error"});
    writeCsvRow(out, {"0.01", "with,comma", "quote\"inside"});
    CHECK(out.str() == "t,abs_z,error\r\n0.01,\"with,comma\",\"quote\"\"inside\"\r\n");

    CHECK(formatDouble(0.1) == "0.10000000000000001");
    CHECK(std::stod(formatDouble(1.0 / 3.0)) == 1.0 / 3.0);
}
