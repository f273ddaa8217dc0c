#include "layout.hpp"

#include "vptrap/scattering.hpp"

#include <algorithm>
#include <iostream>

namespace vptrap::cli {

namespace {

ParticleTrack load_track(const fs::path& run_dir, const std::vector<double>& times) {
    const auto stat = io::decode_table(read_input(run_dir / "particles" / "static.vpt"));
    ParticleTrack tr;
    for (std::size_t r = 0; r < stat.rows(); ++r) {
        tr.w.push_back(stat.at(r, 0));
        tr.vol.push_back(stat.at(r, 1));
        tr.f0.push_back(stat.at(r, 2));
    }
    tr.det_j.assign(tr.w.size(), 1.0);
    for (double t : times) {
        const auto tab = io::decode_table(read_input(run_dir / "particles" / ("z_" + time_tag(t) + ".vpt")));
        if (tab.rows() != tr.w.size() || tab.columns != 5) throw NumericalError("particle snapshot has the wrong shape");
        PhaseSnapshot s{t, {}};
        s.z.reserve(tab.rows());
        for (std::size_t r = 0; r < tab.rows(); ++r) {
            s.z.push_back({{tab.at(r, 0), tab.at(r, 1)}, {tab.at(r, 2), tab.at(r, 3)}});
            tr.det_j[r] = tab.at(r, 4);
        }
        tr.snapshots.push_back(std::move(s));
    }
    return tr;
}

}  // namespace

int cmd_scatter(const fs::path& run_dir, const GlobalOptions& opt) {
    const auto cfg = load_run_config(run_dir);
    const auto times = times_with(run_dir / "particles", "z", ".vpt");
    std::vector<double> late;
    for (double t : times)
        if (t >= 3.0 - 1e-12) late.push_back(t);
    if (late.size() < 3) {
        std::string need;
        for (double t : cfg.sample_times)
            if (t >= 3.0) need += " " + io::format_number(t);
        throw MissingInput("scatter needs particle snapshots at three or more sample times >= 3; found " +
                           std::to_string(late.size()) + ", required times:" + (need.empty() ? " (none configured)" : need) +
                           " (run with run.snapshot_particles = true)");
    }
    const auto diag = io::parse_csv(read_input(run_dir / "diagnostics.csv"));
    const auto track = load_track(run_dir, late);
    const double t2 = late.back();
    double t1 = late.front();
    for (double t : late)
        if (t <= t2 - 2.0 + 1e-9) t1 = t;
    const auto xg = io::decode_snapshot(read_input(run_dir / "grids" / ("rho_" + time_tag(t2) + ".vph"))).spec;

    io::OutputDir out(opt.out.empty() ? run_dir / "scatter" : fs::path(opt.out));
    auto manifest = manifest_base("scatter", &cfg, opt);
    const auto sc = extract_scattering(track, xg, cfg, {t1, t2, 0});
    for (const auto& w : sc.q.warnings) manifest["warnings"].push_back(w);

    out.write("q_inf.vph", io::encode_snapshot(sc.q.q_inf, t2));
    out.write("phi_asymp.vph", io::encode_snapshot(sc.field.phi, t2));
    out.write("grad_phi_asymp.vph", io::encode_snapshot(sc.field.grad, t2));
    for (int a = 0; a < 2; ++a) {
        const auto ax = std::to_string(a + 1);
        out.write("f_inf_density_axis" + ax + ".vph", io::encode_snapshot(sc.f_inf.density[a], t2));
        out.write("f_inf_value_axis" + ax + ".vph", io::encode_snapshot(sc.f_inf.value[a], t2));
    }

    io::CsvTable qconv({"t", "q_sup_diff_prev"});
    for (std::size_t k = 0; k < sc.q.successive.size(); ++k) qconv.add_row({sc.q.times[k + 1], sc.q.successive[k]});
    out.write("q_convergence.csv", qconv.str());

    const auto tab = scattering_convergence(track, late, sc.field.grad, cfg.mu);
    io::CsvTable conv({"t", "t_prev", "sup_diff", "control_sup_diff"});
    for (std::size_t k = 0; k < tab.sup_diff.size(); ++k)
        conv.add_row({tab.times[k + 1], tab.times[k], tab.sup_diff[k], tab.control_diff[k]});
    out.write("convergence.csv", conv.str());

    std::vector<double> window;
    for (double t : late)
        if (t >= 4.0 - 1e-9 && t <= 7.0 + 1e-9) window.push_back(t);
    if (window.size() < 2) window = late;
    const auto slopes = scattering_convergence(track, window, sc.field.grad, cfg.mu);

    // A fixed subset of particles, every time, corrected and control coordinates.
    const std::size_t n = track.w.size(), stride = std::max<std::size_t>(1, n / 256);
    io::CsvTable pc({"t", "index", "s_inf1", "s_inf2", "u_inf1", "u_inf2", "control_s1", "control_s2"});
    for (const auto& snap : track.snapshots) {
        const auto c = scattering_coords(snap, track.f0, sc.field.grad, cfg.mu, true);
        const auto z = scattering_coords(snap, track.f0, sc.field.grad, cfg.mu, false);
        for (std::size_t k = 0; k < n; k += stride)
            pc.add_row({snap.t, static_cast<double>(k), c.points[k].s_inf.x, c.points[k].s_inf.y, c.points[k].u_inf.x,
                        c.points[k].u_inf.y, z.points[k].s_inf.x, z.points[k].s_inf.y});
    }
    out.write("particle_coords.csv", pc.str());

    io::CsvTable fconv({"t", "force_profile_error"});
    for (double t : times_with(run_dir / "profiles", "force", ".vph")) {
        if (t < 1.0) continue;
        const auto f = io::decode_snapshot(read_input(run_dir / "profiles" / ("force_" + time_tag(t) + ".vph"))).vector();
        fconv.add_row({t, force_profile_error(f, sc.field.grad)});
    }
    out.write("force_convergence.csv", fconv.str());

    const double h0 = diag.column("energy").at(0);
    const auto rep = asymptotic_conservation_check(sc.f_inf, sc.coords, track, sc.field, cfg.mu, h0, cfg.epsilon);

    nlohmann::json report;
    report["t1"] = t1;
    report["t2"] = t2;
    report["q_inf_error"] = sc.q.error;
    report["unresolved"] = sc.coords.unresolved;
    report["resolved_fraction"] = sc.f_inf.resolved_fraction;
    report["estimator_rms_difference"] = estimator_agreement(sc.f_inf);
    report["slope_window"] = window;
    report["slope_corrected"] = slopes.slope_corrected;
    report["slope_control"] = slopes.slope_control;
    report["conservation"] = {{"mass_initial", rep.mass_initial},       {"mass_f_inf", rep.mass_f_inf},
                              {"mass_rel_error", rep.mass_rel_error},   {"kinetic_grid", rep.kinetic_grid},
                              {"kinetic_particles", rep.kinetic_particles}, {"potential", rep.potential},
                              {"h_initial", rep.h_initial},             {"h_f_inf", rep.h_f_inf},
                              {"h_rel_error", rep.h_rel_error}};
    const auto tdiag = diag.column("t");
    const auto last = std::find_if(tdiag.begin(), tdiag.end(), [&](double t) { return std::abs(t - t2) < 1e-9; });
    if (last != tdiag.end()) {
        const auto row = static_cast<std::size_t>(last - tdiag.begin());
        const double r = 0.5 * cfg.sigma_u;
        for (const auto& [name, ubar] : std::vector<std::pair<std::string, Vec2>>{
                 {"gaussian", {0, 0}}, {"cosine", {0, 0}}, {"gaussian_shift", {0.5 * cfg.sigma_u, 0}}}) {
            const auto g = make_test_function(name == "gaussian_shift" ? "gaussian" : name);
            report["weak"][name] = {{"value", diag.column("weak_" + name).at(row)},
                                    {"prediction", weak_prediction(sc.q.q_inf, g, ubar, r)}};
        }
    }
    out.write("report.json", report.dump(2) + "\n");
    manifest["status"] = "ok";
    write_manifest(out, manifest);

    std::cout << "q_inf error " << sc.q.error << ", mass rel " << rep.mass_rel_error << ", H rel " << rep.h_rel_error
              << ", slopes control/corrected " << slopes.slope_control << "/" << slopes.slope_corrected << "\n";
    return 0;
}

}  // namespace vptrap::cli
