#include "vptrap/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace vptrap::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string shortest(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& key, const std::string& s, int line) {
    T v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw ConfigError(key, "line " + std::to_string(line) + ": " + key + ": cannot parse '" + s + "'", line);
    return v;
}

bool parse_bool(const std::string& key, const std::string& s, int line) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError(key, "line " + std::to_string(line) + ": " + key + ": expected true or false, got '" + s + "'",
                      line);
}

struct Field {
    const char* key;
    std::function<void(SimConfig&, const std::string&, int)> set;
    std::function<std::string(const SimConfig&)> get;
};

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        {"physics.mu", [](SimConfig& c, const std::string& v, int l) { c.mu = parse_number<int>("physics.mu", v, l); },
         [](const SimConfig& c) { return std::to_string(c.mu); }},
        {"physics.epsilon",
         [](SimConfig& c, const std::string& v, int l) { c.epsilon = parse_number<double>("physics.epsilon", v, l); },
         [](const SimConfig& c) { return shortest(c.epsilon); }},
        {"initial.sigma_s",
         [](SimConfig& c, const std::string& v, int l) { c.sigma_s = parse_number<double>("initial.sigma_s", v, l); },
         [](const SimConfig& c) { return shortest(c.sigma_s); }},
        {"initial.sigma_u",
         [](SimConfig& c, const std::string& v, int l) { c.sigma_u = parse_number<double>("initial.sigma_u", v, l); },
         [](const SimConfig& c) { return shortest(c.sigma_u); }},
        {"particles.n",
         [](SimConfig& c, const std::string& v, int l) { c.n_particles = parse_number<std::int64_t>("particles.n", v, l); },
         [](const SimConfig& c) { return std::to_string(c.n_particles); }},
        {"particles.seed",
         [](SimConfig& c, const std::string& v, int l) { c.seed = parse_number<std::uint64_t>("particles.seed", v, l); },
         [](const SimConfig& c) { return std::to_string(c.seed); }},
        {"grid.n", [](SimConfig& c, const std::string& v, int l) { c.grid_n = parse_number<int>("grid.n", v, l); },
         [](const SimConfig& c) { return std::to_string(c.grid_n); }},
        {"grid.policy", [](SimConfig& c, const std::string& v, int) { c.grid_policy = v; },
         [](const SimConfig& c) { return c.grid_policy; }},
        {"grid.max_extent",
         [](SimConfig& c, const std::string& v, int l) {
             c.grid_max_extent = parse_number<double>("grid.max_extent", v, l);
         },
         [](const SimConfig& c) { return shortest(c.grid_max_extent); }},
        {"time.dt", [](SimConfig& c, const std::string& v, int l) { c.dt = parse_number<double>("time.dt", v, l); },
         [](const SimConfig& c) { return shortest(c.dt); }},
        {"time.t_final",
         [](SimConfig& c, const std::string& v, int l) { c.t_final = parse_number<double>("time.t_final", v, l); },
         [](const SimConfig& c) { return shortest(c.t_final); }},
        {"time.samples",
         [](SimConfig& c, const std::string& v, int l) {
             c.sample_times.clear();
             std::stringstream ss(v);
             std::string tok;
             while (std::getline(ss, tok, ',')) c.sample_times.push_back(parse_number<double>("time.samples", trim(tok), l));
         },
         [](const SimConfig& c) {
             std::string s;
             for (std::size_t k = 0; k < c.sample_times.size(); ++k) s += (k ? "," : "") + shortest(c.sample_times[k]);
             return s;
         }},
        {"diagnostics.norm_M",
         [](SimConfig& c, const std::string& v, int l) { c.norm_M = parse_number<int>("diagnostics.norm_M", v, l); },
         [](const SimConfig& c) { return std::to_string(c.norm_M); }},
        {"run.coupling",
         [](SimConfig& c, const std::string& v, int l) { c.coupling = parse_bool("run.coupling", v, l); },
         [](const SimConfig& c) { return std::string(c.coupling ? "true" : "false"); }},
        {"run.reproducible",
         [](SimConfig& c, const std::string& v, int l) { c.reproducible = parse_bool("run.reproducible", v, l); },
         [](const SimConfig& c) { return std::string(c.reproducible ? "true" : "false"); }},
        {"run.snapshot_particles",
         [](SimConfig& c, const std::string& v, int l) { c.snapshot_particles = parse_bool("run.snapshot_particles", v, l); },
         [](const SimConfig& c) { return std::string(c.snapshot_particles ? "true" : "false"); }},
    };
    return f;
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.emplace_back(f.key);
    return k;
}

SimConfig parse_config(const std::string& text) {
    SimConfig cfg;
    std::map<std::string, int> seen;
    std::istringstream in(text);
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string s = trim(std::string_view(raw).substr(0, hash));
        if (s.empty()) continue;
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("", "line " + std::to_string(line) + ": expected key = value", line);
        const std::string key = trim(std::string_view(s).substr(0, eq));
        const std::string value = trim(std::string_view(s).substr(eq + 1));
        const auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) { return key == f.key; });
        if (it == fields().end())
            throw ConfigError(key, "line " + std::to_string(line) + ": unknown key '" + key + "'", line);
        if (seen.count(key))
            throw ConfigError(key,
                              "line " + std::to_string(line) + ": duplicate key '" + key + "' (first on line " +
                                  std::to_string(seen[key]) + ")",
                              line);
        if (value.empty())
            throw ConfigError(key, "line " + std::to_string(line) + ": " + key + ": empty value", line);
        seen[key] = line;
        it->set(cfg, value, line);
    }
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        const auto it = seen.find(e.field);
        if (it == seen.end()) throw;
        throw ConfigError(e.field, "line " + std::to_string(it->second) + ": " + e.what(), it->second);
    }
    return cfg;
}

SimConfig load_config(const fs::path& path) { return parse_config(read_file(path)); }

std::string serialize_config(const SimConfig& cfg) {
    std::string out;
    for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
    return out;
}

bool operator==(const SimConfig& a, const SimConfig& b) { return serialize_config(a) == serialize_config(b); }

void atomic_write(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int k = 0; k < len; ++k) {
        out += hex[md[k] >> 4];
        out += hex[md[k] & 15];
    }
    return out;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

}  // namespace

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(const std::vector<double>& row) {
    if (row.size() != header_.size()) throw NumericalError("csv row width differs from the header");
    rows_.push_back(row);
}

std::string CsvTable::str() const {
    std::string out;
    for (std::size_t c = 0; c < header_.size(); ++c) out += (c ? "," : "") + csv_field(header_[c]);
    out += "\r\n";
    for (const auto& r : rows_) {
        for (std::size_t c = 0; c < r.size(); ++c) out += (c ? "," : "") + format_number(r[c]);
        out += "\r\n";
    }
    return out;
}

std::vector<double> ParsedCsv::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("csv has no column '" + name + "'");
    const auto c = static_cast<std::size_t>(it - header.begin());
    std::vector<double> out;
    for (const auto& r : rows) out.push_back(r.at(c));
    return out;
}

ParsedCsv parse_csv(const std::string& text) {
    // Records of fields; quoted fields may hold commas, quotes and newlines.
    std::vector<std::vector<std::string>> recs(1);
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t k = 0; k < text.size(); ++k) {
        const char c = text[k];
        if (quoted) {
            if (c == '"' && k + 1 < text.size() && text[k + 1] == '"') {
                field += '"';
                ++k;
            } else if (c == '"') {
                quoted = false;
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            recs.back().push_back(field);
            field.clear();
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && k + 1 < text.size() && text[k + 1] == '\n') ++k;
            recs.back().push_back(field);
            field.clear();
            recs.emplace_back();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (any || !field.empty()) recs.back().push_back(field);
    if (recs.back().empty()) recs.pop_back();
    ParsedCsv out;
    if (recs.empty()) return out;
    out.header = recs[0];
    for (std::size_t r = 1; r < recs.size(); ++r) {
        if (recs[r].size() != out.header.size()) throw Error("csv record " + std::to_string(r) + " has wrong width");
        std::vector<double> row;
        for (const auto& f : recs[r]) {
            if (f == "nan") row.push_back(std::numeric_limits<double>::quiet_NaN());
            else if (f == "inf") row.push_back(std::numeric_limits<double>::infinity());
            else if (f == "-inf") row.push_back(-std::numeric_limits<double>::infinity());
            else {
                double v = 0.0;
                const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
                if (res.ec != std::errc() || res.ptr != f.data() + f.size())
                    throw Error("csv record " + std::to_string(r) + ": cannot parse '" + f + "'");
                row.push_back(v);
            }
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

namespace {

template <class T>
void put(std::string& out, T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out.append(b, sizeof(T));
}

struct Reader {
    const std::string& s;
    std::size_t pos = 0;
    template <class T>
    T get() {
        if (pos + sizeof(T) > s.size()) throw NumericalError("binary data truncated");
        T v;
        std::memcpy(&v, s.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
};

std::string snapshot_header(const GridSpec& g, double time, std::uint32_t components) {
    std::string out = "VPH1";
    put<std::uint32_t>(out, static_cast<std::uint32_t>(g.n));
    put(out, g.origin.x);
    put(out, g.origin.y);
    put(out, g.h);
    put(out, time);
    put(out, components);
    return out;
}

}  // namespace

std::string encode_snapshot(const ScalarField2D& f, double time) {
    std::string out = snapshot_header(f.spec, time, 1);
    out.reserve(out.size() + 8 * f.values.size());
    for (double v : f.values) put(out, v);
    return out;
}

std::string encode_snapshot(const VectorField2D& f, double time) {
    std::string out = snapshot_header(f.spec, time, 2);
    out.reserve(out.size() + 16 * f.values.size());
    for (const auto& v : f.values) {
        put(out, v.x);
        put(out, v.y);
    }
    return out;
}

Snapshot decode_snapshot(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, "VPH1") != 0) throw NumericalError("not a VPH1 snapshot");
    Reader r{bytes, 4};
    Snapshot s;
    s.spec.n = static_cast<int>(r.get<std::uint32_t>());
    s.spec.origin.x = r.get<double>();
    s.spec.origin.y = r.get<double>();
    s.spec.h = r.get<double>();
    s.time = r.get<double>();
    s.components = r.get<std::uint32_t>();
    if (s.components != 1 && s.components != 2) throw NumericalError("VPH1: components must be 1 or 2");
    const std::size_t count = static_cast<std::size_t>(s.components) * s.spec.size();
    if (bytes.size() != r.pos + 8 * count) throw NumericalError("VPH1: size does not match the header");
    s.values.resize(count);
    std::memcpy(s.values.data(), bytes.data() + r.pos, 8 * count);
    return s;
}

ScalarField2D Snapshot::scalar() const {
    if (components != 1) throw NumericalError("snapshot is not scalar");
    ScalarField2D f(spec);
    f.values = values;
    return f;
}

VectorField2D Snapshot::vector() const {
    if (components != 2) throw NumericalError("snapshot is not a vector field");
    VectorField2D f(spec);
    for (std::size_t k = 0; k < f.values.size(); ++k) f.values[k] = {values[2 * k], values[2 * k + 1]};
    return f;
}

std::string encode_table(const ParticleTable& t) {
    if (t.columns == 0 || t.values.size() % t.columns) throw NumericalError("VPT1: ragged table");
    std::string out = "VPT1";
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows()));
    put<std::uint32_t>(out, t.columns);
    put(out, t.time);
    const std::size_t off = out.size();
    out.resize(off + 8 * t.values.size());
    std::memcpy(out.data() + off, t.values.data(), 8 * t.values.size());
    return out;
}

ParticleTable decode_table(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, "VPT1") != 0) throw NumericalError("not a VPT1 table");
    Reader r{bytes, 4};
    const auto rows = r.get<std::uint32_t>();
    ParticleTable t;
    t.columns = r.get<std::uint32_t>();
    t.time = r.get<double>();
    const std::size_t count = static_cast<std::size_t>(rows) * t.columns;
    if (bytes.size() != r.pos + 8 * count) throw NumericalError("VPT1: size does not match the header");
    t.values.resize(count);
    std::memcpy(t.values.data(), bytes.data() + r.pos, 8 * count);
    return t;
}

OutputDir::OutputDir(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

void OutputDir::write(const std::string& rel, const std::string& bytes) {
    atomic_write(root_ / rel, bytes);
    ManifestEntry e{rel, sha256_hex(bytes), bytes.size()};
    const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const ManifestEntry& m) { return m.path == rel; });
    if (it != entries_.end()) *it = e;
    else entries_.push_back(e);
}

namespace {

std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace

std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<PlotSeries>& series, bool log_y) {
    constexpr double W = 640, H = 420, L = 80, R = 150, T = 40, B = 50;
    auto ty = [&](double y) { return log_y ? std::log10(y) : y; };
    auto usable = [&](double x, double y) { return std::isfinite(x) && std::isfinite(y) && (!log_y || y > 0); };
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) {
            if (!usable(s.x[k], s.y[k])) continue;
            x0 = std::min(x0, s.x[k]);
            x1 = std::max(x1, s.x[k]);
            y0 = std::min(y0, ty(s.y[k]));
            y1 = std::max(y1, ty(s.y[k]));
        }
    if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y0 -= 0.5, y1 += 0.5;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(title)
      << "</text>\n";
    o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + k * (x1 - x0) / 4, yv = y0 + k * (y1 - y0) / 4;
        o << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(H - B + 16) << "\" text-anchor=\"middle\">" << tick(xv)
          << "</text>\n";
        o << "<text x=\"" << num(L - 6) << "\" y=\"" << num(py(yv) + 4) << "\" text-anchor=\"end\">"
          << (log_y ? "1e" + tick(yv) : tick(yv)) << "</text>\n";
    }
    o << "<text x=\"" << num(L + (W - L - R) / 2) << "\" y=\"" << num(H - 10) << "\" text-anchor=\"middle\">"
      << esc(xlabel) << "</text>\n";
    o << "<text x=\"16\" y=\"" << num(T + (H - T - B) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << num(T + (H - T - B) / 2) << ")\">" << esc(ylabel) << "</text>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* col = colors[s % 7];
        std::string pts;
        auto flush = [&] {
            if (!pts.empty())
                o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"" << pts
                  << "\"/>\n";
            pts.clear();
        };
        const auto& S = series[s];
        for (std::size_t k = 0; k < S.x.size() && k < S.y.size(); ++k) {
            if (!usable(S.x[k], S.y[k])) {
                flush();
                continue;
            }
            pts += num(px(S.x[k])) + "," + num(py(ty(S.y[k]))) + " ";
        }
        flush();
        const double ly = T + 14 + 16 * static_cast<double>(s);
        o << "<line x1=\"" << W - R + 10 << "\" y1=\"" << num(ly - 4) << "\" x2=\"" << W - R + 30 << "\" y2=\""
          << num(ly - 4) << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << W - R + 34 << "\" y=\"" << num(ly) << "\">" << esc(S.name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

}  // namespace vptrap::io
