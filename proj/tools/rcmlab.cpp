// rcmlab: simulation and verification lab for random walks among random
// conductances on finite boxes.
//
//   rcmlab heat --config cfg.json --out outdir
//   rcmlab verify --seed 42 --side 32 --alpha 0.5
//   rcmlab env generate --out env.json --side 16 --law uniform01
//
// Exit codes: 0 pass, 1 check failure, 2 usage error, 3 resource error.

#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "rcm/cluster.hpp"
#include "rcm/harness.hpp"

using namespace rcm;
using nlohmann::json;

namespace {

struct CliState {
    std::string configPath;
    ExperimentConfig config;
    // flag presence trackers so CLI values override config-file values
    std::string topology = "torus";
    std::string lawKind;
    double gamma = 1.0, p = 0.5, weakValue = 0.1;
    std::int64_t trapU = -1, trapV = -1, trapScale = 2;
};

void add_common_options(CLI::App* cmd, CliState& st) {
    cmd->add_option("--config", st.configPath, "JSON config file");
    cmd->add_option("--seed", st.config.masterSeed, "master seed");
    cmd->add_option("--threads", st.config.threads, "replica-level threads");
    cmd->add_option("--out", st.config.outDir, "output directory");
    cmd->add_flag("--override-horizon", st.config.overrideHorizon,
                  "allow statistics beyond the Z^d-exact horizon");
    cmd->add_option("--dimension", st.config.box.dimension, "box dimension");
    cmd->add_option("--side", st.config.box.side, "box side length");
    cmd->add_option("--topology", st.topology, "torus|free");
    cmd->add_option("--alpha", st.config.alpha, "strong-edge cut-off");
    cmd->add_option("--law", st.lawKind, "uniform01|powerTail|twoPoint");
    cmd->add_option("--gamma", st.gamma, "powerTail exponent");
    cmd->add_option("--p", st.p, "twoPoint strong probability");
    cmd->add_option("--weak", st.weakValue, "twoPoint weak value");
    cmd->add_option("--env-file", st.config.envFile, "explicit environment file");
    cmd->add_option("--n", st.config.nMax, "n (heat range / event horizon)");
    cmd->add_option("--theta", st.config.theta, "theta");
    cmd->add_option("--r", st.config.r, "r (removable excursions)");
    cmd->add_option("--delta", st.config.delta, "delta (sweep width)");
    cmd->add_option("--budget", st.config.mcBudget, "Monte Carlo budget");
    cmd->add_option("--trap-u", st.trapU, "trap edge endpoint u");
    cmd->add_option("--trap-v", st.trapV, "trap edge endpoint v");
    cmd->add_option("--trap-scale", st.trapScale, "trap scale K");
}

// Config file first, then CLI flags on top.
ExperimentConfig resolve(CLI::App* cmd, CliState& st, const std::string& kind) {
    ExperimentConfig config;
    if (!st.configPath.empty()) {
        std::ifstream in(st.configPath);
        if (!in) throw ParameterError("cannot open config " + st.configPath);
        json j;
        in >> j;
        config = ExperimentConfig::from_json(j);
    }
    auto seen = [&](const char* name) { return cmd->count(name) > 0; };
    if (seen("--seed")) config.masterSeed = st.config.masterSeed;
    if (seen("--threads")) config.threads = st.config.threads;
    if (seen("--out")) config.outDir = st.config.outDir;
    if (seen("--override-horizon")) config.overrideHorizon = true;
    if (seen("--dimension")) config.box.dimension = st.config.box.dimension;
    if (seen("--side")) config.box.side = st.config.box.side;
    if (seen("--topology")) {
        if (st.topology == "torus")
            config.box.topology = Topology::torus;
        else if (st.topology == "free")
            config.box.topology = Topology::free;
        else
            throw ParameterError("unknown topology: " + st.topology);
    }
    if (seen("--alpha")) config.alpha = st.config.alpha;
    if (seen("--law")) {
        LawSpec law;
        if (st.lawKind == "uniform01") {
            law.kind = LawSpec::Kind::uniform01;
        } else if (st.lawKind == "powerTail") {
            law.kind = LawSpec::Kind::powerTail;
            law.gamma = st.gamma;
        } else if (st.lawKind == "twoPoint") {
            law.kind = LawSpec::Kind::twoPoint;
            law.p = st.p;
            law.weakValue = st.weakValue;
        } else {
            throw ParameterError("unknown law: " + st.lawKind);
        }
        config.law = law;
    }
    if (seen("--env-file")) config.envFile = st.config.envFile;
    if (seen("--n")) config.nMax = st.config.nMax;
    if (seen("--theta")) config.theta = st.config.theta;
    if (seen("--r")) config.r = st.config.r;
    if (seen("--delta")) config.delta = st.config.delta;
    if (seen("--budget")) config.mcBudget = st.config.mcBudget;
    if (seen("--trap-u") || seen("--trap-v")) {
        TrapSpec trap;
        trap.u = st.trapU;
        trap.v = st.trapV;
        trap.scale = st.trapScale;
        config.trap = trap;
    }
    config.kind = kind;
    return config;
}

int run_kind(CLI::App* cmd, CliState& st, const std::string& kind) {
    ExperimentConfig config = resolve(cmd, st, kind);
    int code = run_experiment(config);
    std::ifstream report(config.outDir + "/report.json");
    if (report) std::cout << report.rdbuf();
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"random-conductance walk laboratory"};
    app.require_subcommand(1);

    CliState st;

    auto* envCmd = app.add_subcommand("env", "generate or inspect environments");
    envCmd->require_subcommand(1);
    auto* envGen = envCmd->add_subcommand("generate", "sample and save");
    std::string envOut = "environment.json";
    envGen->add_option("--file", envOut, "output environment file");
    add_common_options(envGen, st);
    auto* envInspect = envCmd->add_subcommand("inspect", "summarize a file");
    std::string envIn;
    envInspect->add_option("--file", envIn, "environment file")->required();
    double inspectAlpha = 0.0;
    envInspect->add_option("--alpha", inspectAlpha,
                           "also decompose at this cut-off");

    auto* heat = app.add_subcommand("heat", "exact diagonal heat-kernel decay");
    add_common_options(heat, st);
    auto* coarse = app.add_subcommand("coarse", "coarse-walk diagnostics");
    add_common_options(coarse, st);
    auto* spectral = app.add_subcommand("spectral", "hole-operator checks");
    add_common_options(spectral, st);
    auto* trap = app.add_subcommand("trap", "conditional trapping estimates");
    add_common_options(trap, st);
    auto* sweep = app.add_subcommand("sweep", "proposition-style sweeps");
    add_common_options(sweep, st);
    auto* verify = app.add_subcommand("verify", "run every property suite");
    add_common_options(verify, st);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (envGen->parsed()) {
            ExperimentConfig config = resolve(envGen, st, "verify-all");
            Environment env = config.make_environment();
            env.save(envOut);
            std::cout << "wrote " << envOut << "\n";
            return 0;
        }
        if (envInspect->parsed()) {
            Environment env = Environment::load(envIn);
            json j = env.to_json(false);
            if (inspectAlpha > 0.0) {
                ClusterDecomposition dec(env, inspectAlpha);
                j["decomposition"] = dec.diagnostics();
            }
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (heat->parsed()) return run_kind(heat, st, "heat-decay");
        if (coarse->parsed()) return run_kind(coarse, st, "coarse-diagnostics");
        if (spectral->parsed()) return run_kind(spectral, st, "spectral-verify");
        if (trap->parsed()) return run_kind(trap, st, "trap-conditional");
        if (sweep->parsed()) return run_kind(sweep, st, "proposition-sweep");
        if (verify->parsed()) return run_kind(verify, st, "verify-all");
    } catch (const ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return 2;
    } catch (const ResourceError& e) {
        std::cerr << "resource error: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
