#include "doctest.h"

#include "holinear/gallery.hpp"
#include "holinear/modelio.hpp"
#include "holinear/report.hpp"

#include <sstream>

using namespace holinear;

TEST_CASE("parse_map: inline polynomial definition") {
    Json j = Json::parse(R"({
        "name": "demo", "dim": 2,
        "L": [[0.5, 0.0], [0.0, 0.25]],
        "terms": [[0.1, [2, 0], 0], [-0.2, [1, 1], 1]],
        "delta": 0.3
    })");
    MapBundle m = parse_map(j);
    CHECK(m.dim() == 2);
    CHECK(m.delta() == 0.3);
    CHECK(m.name() == "demo");
    Vec x(2);
    x << 0.1, 0.2;
    CHECK(m.eval(x)[0] == doctest::Approx(0.5 * 0.1 + 0.1 * 0.01));
    CHECK(m.eval(x)[1] == doctest::Approx(0.25 * 0.2 - 0.2 * 0.1 * 0.2));
}

TEST_CASE("parse_map: builtin and malformed inputs") {
    Json b = Json::parse(R"({"builtin": "hartman", "params": [4, 3, 0.5, 1]})");
    MapBundle m = parse_map(b);
    CHECK(m.dim() == 3);
    CHECK(m.name() == "hartman");

    CHECK_THROWS_AS(parse_map(Json::parse(R"({"dim": 2})")), Error);
    CHECK_THROWS_AS(parse_map(Json::parse(R"({"builtin": "nope"})")), Error);
    // linear term in the map schema is rejected (belongs to L)
    Json bad = Json::parse(R"({
        "dim": 1, "L": [[0.5]], "terms": [[0.1, [1], 0]], "delta": 0.2
    })");
    CHECK_THROWS_AS(parse_map(bad), Error);
    // term coord out of range
    Json bad2 = Json::parse(R"({
        "dim": 1, "L": [[0.5]], "terms": [[0.1, [2], 3]], "delta": 0.2
    })");
    CHECK_THROWS_AS(parse_map(bad2), Error);
}

TEST_CASE("parse_field: linear part read from degree-1 terms") {
    Json j = Json::parse(R"({
        "dim": 2,
        "terms": [[1.0, [1, 0], 0], [-0.5, [0, 1], 1], [0.3, [0, 2], 0]],
        "radius": 0.5
    })");
    VectorFieldDef f = parse_field(j);
    Mat l = f.linear_part();
    CHECK(l(0, 0) == doctest::Approx(1.0));
    CHECK(l(1, 1) == doctest::Approx(-0.5));
    CHECK(l(0, 1) == 0.0);
    Vec x(2);
    x << 0.0, 0.2;
    CHECK(f.eval(x)[0] == doctest::Approx(0.3 * 0.04));
}

TEST_CASE("builtin flag and sweep spec parsing") {
    auto [tag, params] = parse_builtin_flag("hartman:4,3,0.5,1");
    CHECK(tag == "hartman");
    REQUIRE(params.size() == 4);
    CHECK(params[1] == 3.0);

    SweepSpec spec = parse_sweep_spec("b:0:0.1:21");
    CHECK(spec.param == "b");
    CHECK(spec.lo == 0.0);
    CHECK(spec.hi == doctest::Approx(0.1));
    CHECK(spec.count == 21);
    CHECK_THROWS_AS(parse_sweep_spec("b:0:0.1"), Error);
    CHECK_THROWS_AS(parse_builtin_flag("hartman:x"), Error);
}

TEST_CASE("digest is stable and content sensitive") {
    CHECK(fnv1a_hex("abc") == fnv1a_hex("abc"));
    CHECK(fnv1a_hex("abc") != fnv1a_hex("abd"));
}

TEST_CASE("gallery is deterministic: identical reports byte for byte") {
    GalleryResult a = run_gallery(0, "sternberg-blowup");
    GalleryResult b = run_gallery(0, "sternberg-blowup");
    CHECK(a.report.dump(2) == b.report.dump(2));
    CHECK(a.all_pass);
}

TEST_CASE("gallery rejects unknown item names") {
    CHECK_THROWS_AS(run_gallery(0, "does-not-exist"), Error);
}

TEST_CASE("csv numbers round trip at full precision") {
    for (double v : {1.0 / 3.0, 5.2939559203393771e-23, 0.1, 3.0000000000000004}) {
        std::istringstream in(csv_num(v));
        double back;
        in >> back;
        CHECK(back == v);
    }
}

TEST_CASE("json number sentinel handling") {
    CHECK(json_number(1.5) == Json(1.5));
    CHECK(json_number(std::numeric_limits<double>::infinity()) == Json("inf"));
    CHECK(json_number(std::numeric_limits<double>::quiet_NaN()) == Json("nan"));
}
