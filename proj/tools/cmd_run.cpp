#include "layout.hpp"

#include "vptrap/driver.hpp"

#include <iostream>

namespace vptrap::cli {

namespace {

std::vector<double> sample_row(const DiagnosticsSample& s, const DiagnosticsSample& first, const DiagnosticsSample* prev) {
    const double h0 = first.energy.total;
    const double drift = h0 != 0.0 ? (s.energy.total - h0) / std::abs(h0) : s.energy.total - h0;
    return {s.t,
            s.mass,
            s.sup_e2t_rho,
            s.energy.total,
            s.energy.kinetic,
            s.energy.potential,
            drift,
            prev ? sup_difference(s.q.q, prev->q.q) : std::nan(""),
            static_cast<double>(s.q.dropped),
            s.deriv.sup_Sf,
            s.deriv.sup_Uf,
            s.deriv.uf_ratio,
            s.deriv.weighted_Sf,
            s.deriv.weighted_Uf,
            static_cast<double>(s.deriv.flagged),
            s.weak.at("gaussian"),
            s.weak.at("cosine"),
            s.weak.at("gaussian_shift"),
            static_cast<double>(s.density.missing),
            static_cast<double>(s.regrids)};
}

nlohmann::json grid_json(const GridSpec& g) {
    return {{"n", g.n}, {"origin", {g.origin.x, g.origin.y}}, {"h", g.h}};
}

}  // namespace

int cmd_run(const fs::path& config, const GlobalOptions& opt) {
    auto cfg = io::parse_config(read_input(config));
    if (opt.reproducible) cfg.reproducible = true;
    io::OutputDir out(resolve_output(opt, config));
    auto manifest = manifest_base("run", &cfg, opt);
    out.write("config.txt", io::serialize_config(cfg));

    RunHooks hooks;
    hooks.on_sample = [&](const SimState& st, const DiagnosticsSample& d) {
        const auto tag = time_tag(d.t);
        out.write("grids/rho_" + tag + ".vph", io::encode_snapshot(st.field.rho, st.t));
        out.write("grids/phi_" + tag + ".vph", io::encode_snapshot(st.field.phi, st.t));
        out.write("grids/E_" + tag + ".vph", io::encode_snapshot(st.field.E, st.t));
        out.write("profiles/density_" + tag + ".vph", io::encode_snapshot(d.density.profile, st.t));
        out.write("profiles/force_" + tag + ".vph", io::encode_snapshot(d.force, st.t));
        out.write("profiles/q_" + tag + ".vph", io::encode_snapshot(d.q.q, st.t));
        if (cfg.snapshot_particles && d.t >= 3.0 - 1e-12) {
            io::ParticleTable t{st.t, 5, {}};
            t.values.reserve(5 * st.ensemble.size());
            for (const auto& p : st.ensemble.particles)
                t.values.insert(t.values.end(), {p.z.s.x, p.z.s.y, p.z.u.x, p.z.u.y, p.J.det()});
            out.write("particles/z_" + tag + ".vpt", io::encode_table(t));
        }
        std::cerr << "t=" << d.t << " H=" << d.energy.total << " sup e^2t rho=" << d.sup_e2t_rho << "\n";
    };

    auto r = run_simulation(cfg, hooks);

    {
        io::ParticleTable t{0.0, 3, {}};
        for (std::size_t k = 0; k < r.track.w.size(); ++k)
            t.values.insert(t.values.end(), {r.track.w[k], r.track.vol[k], r.track.f0[k]});
        out.write("particles/static.vpt", io::encode_table(t));
    }
    io::CsvTable diag(diagnostics_header());
    for (std::size_t k = 0; k < r.series.samples.size(); ++k)
        diag.add_row(sample_row(r.series.samples[k], r.series.samples[0], k ? &r.series.samples[k - 1] : nullptr));
    out.write("diagnostics.csv", diag.str());

    io::CsvTable reg({"t", "old_origin_x", "old_origin_y", "old_h", "new_origin_x", "new_origin_y", "new_h"});
    nlohmann::json regrids = nlohmann::json::array();
    for (const auto& e : r.state.regrids) {
        reg.add_row({e.t, e.old_spec.origin.x, e.old_spec.origin.y, e.old_spec.h, e.new_spec.origin.x,
                     e.new_spec.origin.y, e.new_spec.h});
        regrids.push_back({{"t", e.t}, {"old", grid_json(e.old_spec)}, {"new", grid_json(e.new_spec)}});
    }
    out.write("regrids.csv", reg.str());

    manifest["regrids"] = regrids;
    manifest["particles"] = r.state.ensemble.size();
    for (const auto& [name, fit] : r.series.fitted_rates)
        manifest["fitted_rates"][name] = {{"lambda", fit.lambda}, {"log_c", fit.log_c}, {"residual", fit.residual}};
    for (const auto& s : r.series.samples)
        if (s.q.dropped) manifest["warnings"].push_back("stable average dropped particles at t=" + io::format_number(s.t));
    if (!opt.reproducible) manifest["wall_seconds"] = r.wall_seconds;
    manifest["status"] = r.failure.empty() ? "ok" : "failed";
    if (!r.failure.empty()) manifest["failure"] = r.failure;
    write_manifest(out, manifest);

    if (!r.failure.empty()) {
        std::cerr << "numerical failure: " << r.failure << "\n";
        return 3;
    }
    std::cout << out.root().string() << "\n";
    return 0;
}

}  // namespace vptrap::cli
