// opplab command line front end. Every run emits one RunRecord JSON document.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "opplab/harness.hpp"

using opplab::ExperimentConfig;
using opplab::json;

namespace {

struct Globals {
    std::string form;
    std::string seed;
    std::string budget;
    std::string threads;
    std::string out;
    std::string calibration;
    std::string config;
};

// Options are kept as strings and typed later by the harness, so the same
// values can come from a config file.
struct Bag {
    std::map<std::string, std::string> values;
    std::map<std::string, bool> flags;
};

void add_globals(CLI::App* app, Globals& g) {
    app->add_option("--form", g.form, "form JSON file");
    app->add_option("--seed", g.seed, "RNG seed");
    app->add_option("--budget", g.budget, "work budget (accepts 1e8)");
    app->add_option("--threads", g.threads, "worker threads, 0 = hardware");
    app->add_option("--out", g.out, "write the record (or CSV) here instead of stdout");
    app->add_option("--calibration", g.calibration, "calibration JSON");
}

CLI::App* command(CLI::App& parent, const std::string& name, const std::string& help, Bag& bag, Globals& g,
                  const std::vector<std::string>& opts, const std::vector<std::string>& flags = {}) {
    CLI::App* sub = parent.add_subcommand(name, help);
    add_globals(sub, g);
    for (const auto& o : opts) {
        std::string key = o;
        for (char& ch : key)
            if (ch == '-') ch = '_';
        sub->add_option("--" + o, bag.values[name + "." + key]);
    }
    for (const auto& f : flags) {
        std::string key = f;
        for (char& ch : key)
            if (ch == '-') ch = '_';
        sub->add_flag("--" + f, bag.flags[name + "." + key]);
    }
    return sub;
}

std::uint64_t parse_count(const std::string& s, const char* what) {
    if (s.empty()) return 0;
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size() || v < 0 || v != std::floor(v) || v > 1.8e19) throw std::invalid_argument(s);
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw opplab::ParseError(std::string("bad --") + what + " value '" + s + "'");
    }
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream o(out);
    if (!o) throw opplab::InvalidArgument("cannot write " + out);
    o << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quantitative Oppenheim lab"};
    Globals g;
    Bag bag;
    add_globals(&app, g);
    app.add_option("--config", g.config, "run an ExperimentConfig JSON file");
    app.require_subcommand(0, 1);

    const std::vector<std::string> shell = {"a", "b", "r", "c0", "shift"};
    std::vector<std::string> vol = shell;
    vol.push_back("method");
    std::vector<std::string> del = vol;
    del.push_back("volume-budget");
    std::vector<CLI::App*> leaves;
    leaves.push_back(command(app, "count", "lattice points in the truncated shell", bag, g, shell));
    leaves.push_back(command(app, "volume", "volume of the truncated shell", bag, g, vol));
    leaves.push_back(command(app, "delta", "relative count remainder", bag, g, del));
    leaves.push_back(command(app, "theta", "theta sum", bag, g, {"r", "t", "v", "tol", "poisson-terms"}, {"integral"}));
    leaves.push_back(command(app, "psi", "psi majorant", bag, g, {"r", "t", "tol"}));

    CLI::App* lat = app.add_subcommand("lat", "lattice geometry");
    lat->require_subcommand(1);
    Bag latbag;
    for (auto [n, h] : std::vector<std::pair<std::string, std::string>>{
             {"minima", "successive minima"}, {"alpha", "alpha profile"}, {"dual", "dual lattice"}, {"count", "points in a ball"}, {"lll", "LLL reduction"}})
        leaves.push_back(command(*lat, n, h, latbag, g, {"basis", "mu", "mode", "delta"}));

    CLI::App* orbit = app.add_subcommand("orbit", "orbit family");
    orbit->require_subcommand(1);
    Bag orbag;
    leaves.push_back(command(*orbit, "gamma", "gamma scan", orbag, g, {"r", "tmin", "tmax", "beta", "grid", "refine"}));
    leaves.push_back(command(*orbit, "tau", "tau hat", orbag, g, {"lambda", "a"}));
    leaves.push_back(command(*orbit, "gm", "averaged slope check", orbag, g, {"d", "beta", "a", "quad-n"}));

    CLI::App* dio = app.add_subcommand("dio", "diophantine tools");
    dio->require_subcommand(1);
    Bag diobag;
    leaves.push_back(command(*dio, "min", "best approximation", diobag, g, {"A", "R", "t"}));
    leaves.push_back(command(*dio, "type", "diophantine type fit", diobag, g, {"rmax"}));
    leaves.push_back(command(*dio, "rho", "rho(r)", diobag, g, {"r", "width", "beta", "grid", "gamma-grid"}));

    leaves.push_back(command(app, "solve", "small solution certificate", bag, g,
                             {"eps", "method", "rcap", "size-cap", "tmin", "tmax", "beta", "grid"}, {"no-fallback"}));
    leaves.push_back(command(app, "gaps", "value gaps", bag, g, {"r", "c0"}, {"values"}));
    leaves.push_back(command(app, "bounds", "explicit bound report", bag, g, {"eps", "eta", "kappa", "delta", "beta"}));
    leaves.push_back(command(app, "calibrate", "fit calibration constants", bag, g, {"write"}));

    std::string manifest, records;
    bool parallel = false;
    CLI::App* suite = app.add_subcommand("suite", "run a manifest of configs and emit CSV");
    add_globals(suite, g);
    suite->add_option("--manifest", manifest, "manifest JSON")->required();
    suite->add_option("--records", records, "also write all RunRecords as a JSON array");
    suite->add_flag("--parallel", parallel, "run configs concurrently");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return opplab::kExitPrecondition;
    }

    try {
        if (!g.calibration.empty()) setenv("OPPLAB_CALIBRATION", g.calibration.c_str(), 1);

        if (suite->parsed()) {
            std::vector<opplab::RunRecord> recs;
            std::string csv = opplab::suite(opplab::load_manifest(opplab::detail::read_json_file(manifest)), parallel, &recs);
            emit(csv, g.out);
            if (!records.empty()) {
                json arr = json::array();
                for (const auto& r : recs) arr.push_back(r.to_json());
                emit(arr.dump(2) + "\n", records);
            }
            return opplab::kExitOk;
        }

        ExperimentConfig cfg;
        if (!g.config.empty()) {
            cfg = ExperimentConfig::from_json(opplab::detail::read_json_file(g.config));
        } else {
            CLI::App* leaf = nullptr;
            CLI::App* group = nullptr;
            for (CLI::App* l : leaves)
                if (l->parsed()) leaf = l;
            if (!leaf) throw opplab::InvalidArgument("no command given");
            for (CLI::App* grp : {lat, orbit, dio})
                if (grp->parsed()) group = grp;
            cfg.command = group ? group->get_name() : leaf->get_name();
            cfg.subcommand = group ? leaf->get_name() : "";
            const Bag& b = group == lat ? latbag : group == orbit ? orbag : group == dio ? diobag : bag;
            const std::string prefix = leaf->get_name() + ".";
            for (const auto& [k, v] : b.values)
                if (k.rfind(prefix, 0) == 0 && !v.empty()) cfg.params[k.substr(prefix.size())] = v;
            for (const auto& [k, v] : b.flags)
                if (k.rfind(prefix, 0) == 0 && v) cfg.params[k.substr(prefix.size())] = true;
        }
        if (!g.form.empty()) cfg.form = g.form;
        if (!g.seed.empty()) cfg.seed = parse_count(g.seed, "seed");
        if (!g.budget.empty()) cfg.budget = parse_count(g.budget, "budget");
        if (!g.threads.empty()) cfg.threads = static_cast<unsigned>(parse_count(g.threads, "threads"));
        if (!g.out.empty()) cfg.out = g.out;
        if (!g.calibration.empty()) cfg.calibration = g.calibration;

        opplab::RunRecord rec = opplab::run(cfg);
        emit(rec.to_json().dump(2) + "\n", cfg.out);
        if (rec.exit_code != 0) std::cerr << "opplab: " << rec.error.value("message", "") << "\n";
        return rec.exit_code;
    } catch (const opplab::Error& e) {
        std::cerr << "opplab: " << e.what() << "\n";
        return opplab::exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "opplab: " << e.what() << "\n";
        return opplab::kExitInternal;
    }
}
