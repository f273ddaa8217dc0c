#include "layout.hpp"

#include "vptrap/criteria.hpp"

#include <iostream>
#include <sstream>

namespace vptrap::cli {

namespace {

std::optional<io::ParsedCsv> try_csv(const fs::path& p, std::vector<std::string>& notes) {
    if (!fs::exists(p)) {
        notes.push_back("missing " + p.filename().string() + ", skipped");
        return std::nullopt;
    }
    return io::parse_csv(io::read_file(p));
}

std::vector<double> window(const io::ParsedCsv& c, const std::string& col, double lo, double hi) {
    const auto t = c.column("t"), v = c.column(col);
    std::vector<double> out;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (t[k] >= lo - 1e-9 && t[k] <= hi + 1e-9) out.push_back(v[k]);
    return out;
}

}  // namespace

int cmd_report(const fs::path& run_dir, const GlobalOptions& opt) {
    if (!fs::is_directory(run_dir)) throw MissingInput("not a run directory: " + run_dir.string());
    io::OutputDir out(opt.out.empty() ? run_dir / "report" : fs::path(opt.out));
    std::vector<std::string> notes;
    std::vector<std::pair<std::string, std::string>> lines;  // criterion, verdict text
    auto verdict = [&](const std::string& name, const criteria::Verdict& v) {
        lines.emplace_back(name, std::string(v.pass ? "PASS  " : "FAIL  ") + v.detail);
    };
    std::vector<std::string> plotted;

    const auto diag = try_csv(run_dir / "diagnostics.csv", notes);
    if (diag && !diag->rows.empty()) {
        const auto t = diag->column("t");
        out.write("rho_decay.svg", io::svg_line_plot("sup e^{2t} rho", "t", "sup e^{2t} rho",
                                                     {{"sup e^{2t} rho", t, diag->column("sup_e2t_rho")}}, true));
        std::vector<double> drift = diag->column("energy_rel_drift");
        for (double& d : drift) d = std::abs(d);
        auto mass = diag->column("mass");
        std::vector<double> mrel;
        for (double m : mass) mrel.push_back(m == mass[0] ? 0.0 : std::abs(m / mass[0] - 1));
        out.write("energy_mass.svg", io::svg_line_plot("Hamiltonian and mass", "t", "relative change",
                                                       {{"|H - H(0)|/|H(0)|", t, drift}, {"|m/m(0) - 1|", t, mrel}}));
        plotted.insert(plotted.end(), {"rho_decay.svg", "energy_mass.svg"});

        verdict("3 conservation (single run; dt halving needs the acceptance binary)",
                criteria::mass_and_energy(mass, diag->column("energy")));
        verdict("4 density decay (this run's mu)", criteria::density_decay(t, diag->column("sup_e2t_rho")));
        verdict("5 stable-average convergence", criteria::geometric(window(*diag, "q_sup_diff_prev", 5, 8), "||dQ||"));
        verdict("8 derivative bounds",
                criteria::derivative_bounds(t, diag->column("sup_Sf"), diag->column("uf_ratio")));
    }

    std::vector<io::PlotSeries> qs;
    for (double tq : times_with(run_dir / "profiles", "q", ".vph")) {
        const auto q = io::decode_snapshot(io::read_file(run_dir / "profiles" / ("q_" + time_tag(tq) + ".vph"))).scalar();
        io::PlotSeries s{"t=" + io::format_number(tq), {}, {}};
        const int j = q.spec.n / 2;
        for (int i = 0; i < q.spec.n; ++i) {
            s.x.push_back(q.spec.node(i, j).x);
            s.y.push_back(q.at(i, j));
        }
        qs.push_back(std::move(s));
    }
    if (!qs.empty()) {
        out.write("q_profiles.svg", io::svg_line_plot("stable average along u~1", "u~1", "Q(t, u~1, 0)", qs));
        plotted.push_back("q_profiles.svg");
    } else {
        notes.push_back("no stable-average profiles, skipped");
    }

    const fs::path sdir = run_dir / "scatter";
    if (fs::is_directory(sdir)) {
        if (auto conv = try_csv(sdir / "convergence.csv", notes)) {
            out.write("scattering_convergence.svg",
                      io::svg_line_plot("scattering coordinates: successive sup differences", "t", "sup difference",
                                        {{"corrected", conv->column("t"), conv->column("sup_diff")},
                                         {"control", conv->column("t"), conv->column("control_sup_diff")}},
                                        true));
            plotted.push_back("scattering_convergence.svg");
            verdict("7 modified scattering: convergence", criteria::geometric(window(*conv, "sup_diff", 5, 7), "sup diff"));
        }
        if (auto fc = try_csv(sdir / "force_convergence.csv", notes)) {
            out.write("force_convergence.svg",
                      io::svg_line_plot("force profile against grad phi_asymp", "t", "sup error",
                                        {{"error", fc->column("t"), fc->column("force_profile_error")}}, true));
            plotted.push_back("force_convergence.svg");
            const auto e5 = window(*fc, "force_profile_error", 5, 5), e7 = window(*fc, "force_profile_error", 7, 7);
            if (!e5.empty() && !e7.empty()) verdict("6 force-profile convergence", criteria::force_profile(e5[0], e7[0]));
        }
        if (fs::exists(sdir / "report.json")) {
            const auto rep = nlohmann::json::parse(io::read_file(sdir / "report.json"));
            verdict("7 modified scattering: control slope",
                    criteria::control_slope(rep["slope_control"], rep["slope_corrected"]));
            std::map<std::string, std::pair<double, double>> weak;
            if (rep.contains("weak"))
                for (const auto* name : {"gaussian", "cosine"})
                    weak[name] = {rep["weak"][name]["value"], rep["weak"][name]["prediction"]};
            verdict("9 weak convergence", criteria::weak_limits(weak));
            verdict("10 scattering conservation",
                    criteria::scattering_conservation(rep["conservation"]["mass_rel_error"],
                                                      rep["conservation"]["h_rel_error"]));
        } else {
            notes.push_back("missing scatter/report.json, skipped");
        }
    } else {
        notes.push_back("no scatter outputs (run `vptrap scatter` first), criteria 6, 7, 9, 10 skipped");
    }

    std::ostringstream s;
    s << "vptrap report for " << run_dir.string() << "\n\n";
    if (plotted.empty()) s << "nothing to plot\n";
    else {
        s << "plots:\n";
        for (const auto& p : plotted) s << "  " << p << "\n";
    }
    s << "\ncriteria evaluable from this run directory:\n";
    if (lines.empty()) s << "  none\n";
    for (const auto& [name, v] : lines) s << "  " << v.substr(0, 4) << "  " << name << ": " << v.substr(6) << "\n";
    s << "\ncriteria 1, 2 and 11, the dt-halving part of 3 and the other sign of mu need the acceptance binary\n";
    if (!notes.empty()) {
        s << "\nnotes:\n";
        for (const auto& n : notes) s << "  " << n << "\n";
    }
    out.write("summary.txt", s.str());
    auto manifest = manifest_base("report", nullptr, opt);
    manifest["status"] = "ok";
    write_manifest(out, manifest);
    std::cout << s.str();
    return 0;
}

}  // namespace vptrap::cli
