// Persistence: key=value configs, RFC-4180 CSV, VPH1 grid snapshots, VPT1
// particle tables, a digest manifest and minimal SVG line plots.
#pragma once

#include "vptrap/core.hpp"
#include "vptrap/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace vptrap::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

/// Flat `section.key = value` lines; '#' starts a comment. Unknown keys,
/// duplicates and unparsable values throw ConfigError carrying the line.
SimConfig parse_config(const std::string& text);
SimConfig load_config(const fs::path& path);
/// Every key, in a fixed order; parse(serialize(c)) == c.
std::string serialize_config(const SimConfig& cfg);
std::vector<std::string> config_keys();

bool operator==(const SimConfig& a, const SimConfig& b);

// ---------------------------------------------------------------------------
// Bytes

/// Writes via a temporary file in the same directory and renames it.
void atomic_write(const fs::path& path, const std::string& bytes);
std::string read_file(const fs::path& path);
std::string sha256_hex(const std::string& bytes);

// ---------------------------------------------------------------------------
// CSV

/// 17 significant digits, '.' decimal, nan/inf spelled out.
std::string format_number(double v);

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);
    void add_row(const std::vector<double>& row);
    std::string str() const;  // CRLF line ends, fields quoted when needed
    const std::vector<std::string>& header() const { return header_; }
    std::size_t rows() const { return rows_.size(); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

struct ParsedCsv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    std::vector<double> column(const std::string& name) const;
};

ParsedCsv parse_csv(const std::string& text);

// ---------------------------------------------------------------------------
// Snapshots

struct Snapshot {
    GridSpec spec;
    double time = 0.0;
    std::uint32_t components = 1;
    std::vector<double> values;  ///< components * n * n, row-major, components interleaved

    ScalarField2D scalar() const;
    VectorField2D vector() const;
};

std::string encode_snapshot(const ScalarField2D& f, double time);
std::string encode_snapshot(const VectorField2D& f, double time);
/// Throws NumericalError on bad magic or truncated data.
Snapshot decode_snapshot(const std::string& bytes);

/// Particle table "VPT1": u32 rows, u32 columns, f64 time, then row-major f64.
struct ParticleTable {
    double time = 0.0;
    std::uint32_t columns = 0;
    std::vector<double> values;
    std::size_t rows() const { return columns ? values.size() / columns : 0; }
    double at(std::size_t r, std::size_t c) const { return values[r * columns + c]; }
};

std::string encode_table(const ParticleTable& t);
ParticleTable decode_table(const std::string& bytes);

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
    std::string path;  ///< relative to the run directory
    std::string sha256;
    std::uintmax_t bytes = 0;
};

/// Collects every file written into one run directory.
class OutputDir {
public:
    explicit OutputDir(fs::path root);
    const fs::path& root() const { return root_; }
    /// Atomic write plus manifest entry (replaces an earlier entry of the same name).
    void write(const std::string& rel, const std::string& bytes);
    const std::vector<ManifestEntry>& entries() const { return entries_; }

private:
    fs::path root_;
    std::vector<ManifestEntry> entries_;
};

// ---------------------------------------------------------------------------
// SVG

struct PlotSeries {
    std::string name;
    std::vector<double> x, y;
};

/// Axes, ticks, legend and one polyline per series; non-finite points (and
/// non-positive ones on a log axis) break the line.
std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<PlotSeries>& series, bool log_y = false);

}  // namespace vptrap::io
