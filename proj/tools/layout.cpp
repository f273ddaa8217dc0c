#include "layout.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>

#ifndef VPTRAP_VERSION
#define VPTRAP_VERSION "unknown"
#endif

namespace vptrap::cli {

std::string time_tag(double t) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, t);
    return "t" + std::string(buf, r.ptr);
}

fs::path resolve_output(const GlobalOptions& opt, const fs::path& input) {
    if (!opt.out.empty()) return opt.out;
    const std::string stem = input.stem().string();
    if (const char* root = std::getenv(kOutputRootEnv); root && *root) return fs::path(root) / stem;
    return fs::path("vptrap_runs") / stem;
}

std::vector<std::string> diagnostics_header() {
    return {"t",           "mass",       "sup_e2t_rho", "energy",      "energy_kinetic", "energy_potential",
            "energy_rel_drift", "q_sup_diff_prev", "q_dropped", "sup_Sf", "sup_Uf", "uf_ratio",
            "weighted_Sf", "weighted_Uf", "flagged",    "weak_gaussian", "weak_cosine", "weak_gaussian_shift",
            "density_missing", "regrids"};
}

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

nlohmann::json manifest_base(const std::string& command, const SimConfig* cfg, const GlobalOptions& opt) {
    nlohmann::json m;
    m["schema_version"] = kSchemaVersion;
    m["code_version"] = std::string("vptrap ") + VPTRAP_VERSION;
    m["command"] = command;
    m["reproducible"] = opt.reproducible;
    if (!opt.reproducible) {
        m["start_time"] = utc_now();
        m["threads"] = opt.threads;
    }
    if (cfg) {
        nlohmann::json c = nlohmann::json::object();
        const auto text = io::serialize_config(*cfg);
        std::size_t pos = 0;
        while (pos < text.size()) {
            const auto nl = text.find('\n', pos);
            const auto line = text.substr(pos, nl - pos);
            const auto eq = line.find(" = ");
            c[line.substr(0, eq)] = line.substr(eq + 3);
            pos = nl + 1;
        }
        m["config"] = c;
    }
    m["warnings"] = nlohmann::json::array();
    return m;
}

void write_manifest(io::OutputDir& out, nlohmann::json m) {
    if (!m.value("reproducible", false)) m["end_time"] = utc_now();
    nlohmann::json files = nlohmann::json::array();
    for (const auto& e : out.entries())
        files.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
    m["files"] = files;
    io::atomic_write(out.root() / "manifest.json", m.dump(2) + "\n");
}

std::string read_input(const fs::path& p) {
    if (!fs::exists(p)) throw MissingInput("missing input: " + p.string());
    return io::read_file(p);
}

SimConfig load_run_config(const fs::path& run_dir) {
    if (!fs::is_directory(run_dir)) throw MissingInput("not a run directory: " + run_dir.string());
    return io::parse_config(read_input(run_dir / "config.txt"));
}

std::vector<double> times_with(const fs::path& dir, const std::string& prefix, const std::string& suffix) {
    std::vector<double> out;
    if (!fs::is_directory(dir)) return out;
    const std::string head = prefix + "_t";
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.size() <= head.size() + suffix.size() || name.compare(0, head.size(), head) != 0) continue;
        if (name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) continue;
        const auto mid = name.substr(head.size(), name.size() - head.size() - suffix.size());
        double t = 0.0;
        const auto r = std::from_chars(mid.data(), mid.data() + mid.size(), t);
        if (r.ec == std::errc() && r.ptr == mid.data() + mid.size()) out.push_back(t);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace vptrap::cli
