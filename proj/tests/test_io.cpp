#include <doctest.h>

#include "vptrap/io.hpp"

#include <cmath>
#include <cstring>
#include <limits>

using namespace vptrap;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    auto p = fs::temp_directory_path() / ("vptrap_test_" + name);
    fs::remove_all(p);
    return p;
}

int error_line(const std::string& text) {
    try {
        io::parse_config(text);
    } catch (const ConfigError& e) {
        return e.line;
    }
    return -1;
}

}  // namespace

TEST_CASE("config: parse, serialize, parse is a fixed point") {
    const std::string text =
        "# reference\n"
        "physics.mu = -1\n"
        "physics.epsilon = 0.001   # small\n"
        "initial.sigma_u = 1.25\n"
        "particles.n = 2001\n"
        "grid.policy = bbox\n"
        "time.samples = 0, 0.5, 1\n"
        "time.t_final = 1\n"
        "run.coupling = false\n";
    const auto a = io::parse_config(text);
    CHECK(a.mu == -1);
    CHECK(a.epsilon == 1e-3);
    CHECK(a.sigma_u == 1.25);
    CHECK(a.n_particles == 2001);
    CHECK(a.grid_policy == "bbox");
    CHECK(a.sample_times == std::vector<double>{0, 0.5, 1});
    CHECK_FALSE(a.coupling);
    const auto s = io::serialize_config(a);
    const auto b = io::parse_config(s);
    CHECK(io::serialize_config(b) == s);
    CHECK(io::operator==(a, b));

    // awkward doubles survive the round trip bit for bit
    SimConfig c;
    c.epsilon = 0.1 + 0.2;
    c.dt = std::nextafter(1e-2, 1.0);
    const auto d = io::parse_config(io::serialize_config(c));
    CHECK(d.epsilon == c.epsilon);
    CHECK(d.dt == c.dt);
    CHECK(io::config_keys().size() == 16);
}

TEST_CASE("config errors carry the line") {
    CHECK(error_line("physics.mu = 1\nphysics.mu = 1\n") == 2);
    CHECK(error_line("\n\ngrid.size = 3\n") == 3);
    CHECK(error_line("physics.epsilon = abc\n") == 1);
    CHECK(error_line("particles.n = 12x\n") == 1);
    CHECK(error_line("time.dt 0.1\n") == 1);
    CHECK(error_line("run.coupling = maybe\n") == 1);
    // validation failures point at the offending key's line
    CHECK(error_line("physics.epsilon = 0.01\n\ngrid.n = 100\n") == 3);
    CHECK(error_line("physics.mu = 2\n") == 1);
    try {
        io::parse_config("time.dt = -1\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field == "time.dt");
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
}

TEST_CASE("csv: 17 significant digits, CRLF, quoting, round trip") {
    io::CsvTable t({"t", "value, with comma", "q\"uote"});
    t.add_row({0.0, 0.1, -1.0 / 3.0});
    t.add_row({1.0, std::numeric_limits<double>::quiet_NaN(), 1e300});
    const auto s = t.str();
    CHECK(s.substr(0, s.find("\r\n")) == "t,\"value, with comma\",\"q\"\"uote\"");
    CHECK(s.find("0.10000000000000001") != std::string::npos);
    CHECK(s.find("-0.33333333333333331") != std::string::npos);
    CHECK(s.find('\n') == s.find("\r\n") + 1);
    const auto p = io::parse_csv(s);
    REQUIRE(p.header.size() == 3);
    CHECK(p.header[1] == "value, with comma");
    CHECK(p.header[2] == "q\"uote");
    CHECK(p.rows[0][2] == -1.0 / 3.0);
    CHECK(std::isnan(p.rows[1][1]));
    CHECK(p.column("t") == std::vector<double>{0.0, 1.0});
    CHECK_THROWS(t.add_row({1.0}));
    CHECK(io::format_number(1e-5) == "1.0000000000000001e-05");
}

TEST_CASE("VPH1 snapshot layout is bit exact") {
    GridSpec g{{-1.5, 2.0}, 0.25, 3};
    ScalarField2D f(g);
    for (std::size_t k = 0; k < f.values.size(); ++k) f.values[k] = 0.5 * k;
    const auto bytes = io::encode_snapshot(f, 7.5);
    CHECK(bytes.size() == 4 + 4 + 4 * 8 + 4 + 9 * 8);
    CHECK(bytes.substr(0, 4) == "VPH1");
    std::uint32_t n = 0, comp = 0;
    double h = 0, t = 0, v4 = 0;
    std::memcpy(&n, bytes.data() + 4, 4);
    std::memcpy(&h, bytes.data() + 24, 8);
    std::memcpy(&t, bytes.data() + 32, 8);
    std::memcpy(&comp, bytes.data() + 40, 4);
    std::memcpy(&v4, bytes.data() + 44 + 4 * 8, 8);
    CHECK(n == 3);
    CHECK(h == 0.25);
    CHECK(t == 7.5);
    CHECK(comp == 1);
    CHECK(v4 == 2.0);
    const auto s = io::decode_snapshot(bytes);
    CHECK(s.spec == g);
    CHECK(s.scalar().values == f.values);

    VectorField2D e(g);
    for (std::size_t k = 0; k < e.values.size(); ++k) e.values[k] = {1.0 * k, -1.0 * k};
    const auto eb = io::encode_snapshot(e, 1.0);
    const auto es = io::decode_snapshot(eb);
    CHECK(es.components == 2);
    CHECK(es.values[2] == 1.0);
    CHECK(es.values[3] == -1.0);
    CHECK(es.vector().values == e.values);
    CHECK_THROWS_AS(io::decode_snapshot(bytes.substr(0, bytes.size() - 1)), NumericalError);
    CHECK_THROWS_AS(io::decode_snapshot("VPX1" + bytes.substr(4)), NumericalError);
    CHECK_THROWS_AS(es.scalar(), NumericalError);
}

TEST_CASE("particle table round trip") {
    io::ParticleTable t{3.0, 4, {1, 2, 3, 4, 5, 6, 7, 8}};
    const auto b = io::encode_table(t);
    const auto u = io::decode_table(b);
    CHECK(u.rows() == 2);
    CHECK(u.time == 3.0);
    CHECK(u.at(1, 2) == 7.0);
    CHECK_THROWS_AS(io::decode_table(b.substr(0, 20)), NumericalError);
}

TEST_CASE("sha256 and the output directory index") {
    CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const auto dir = scratch_dir("outdir");
    io::OutputDir out(dir);
    out.write("a.csv", "x\r\n1\r\n");
    out.write("sub/b.bin", "abc");
    out.write("a.csv", "x\r\n2\r\n");
    REQUIRE(out.entries().size() == 2);
    CHECK(out.entries()[1].sha256 == io::sha256_hex("abc"));
    CHECK(io::read_file(dir / "a.csv") == "x\r\n2\r\n");
    CHECK(out.entries()[0].sha256 == io::sha256_hex("x\r\n2\r\n"));
    CHECK_FALSE(fs::exists(dir / "a.csv.tmp"));
    fs::remove_all(dir);
}

TEST_CASE("svg plot breaks lines at missing points") {
    io::PlotSeries s{"a", {0, 1, 2, 3, 4}, {1, 2, std::nan(""), 4, 5}};
    io::PlotSeries l{"b", {0, 1, 2}, {1, -1, 10}};
    const auto svg = io::svg_line_plot("t & <x>", "t", "y", {s, l}, true);
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("t &amp; &lt;x&gt;") != std::string::npos);
    std::size_t lines = 0;
    for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
    CHECK(lines == 4);
    CHECK(io::svg_line_plot("x", "x", "y", {s}) == io::svg_line_plot("x", "x", "y", {s}));
    CHECK(io::svg_line_plot("empty", "x", "y", {}).find("</svg>") != std::string::npos);
}
