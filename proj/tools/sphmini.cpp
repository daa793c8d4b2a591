#include "sph/simulation.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Rotating square patch SPH mini-app"};

    sph::RunConfig run;
    auto& sim = run.simulation;
    std::string output = "out";
    std::string resume;
    bool uniform_h = false;

    app.add_option("-n,--side", run.side, "particles per edge in x and y")->capture_default_str();
    app.add_option("--layers", run.layers, "particle layers along periodic z")->capture_default_str();
    app.add_option("-s,--steps", run.steps, "number of time steps")->capture_default_str();
    app.add_option("--t-end", run.t_end, "stop once simulated time reaches this value (0: off)");
    app.add_option("-w,--checkpoint-every", run.checkpoint_every,
                   "write a checkpoint every N steps (0: initial and final only)");
    app.add_option("--ranks", sim.ranks, "simulated ranks")->capture_default_str();
    app.add_option("--threads", sim.threads, "worker threads per rank")->capture_default_str();
    app.add_option("--kernel-n", sim.kernel_exponent, "sinc kernel exponent")->capture_default_str();
    app.add_flag("--table,!--no-table", sim.use_table, "tabulated kernel evaluation")->capture_default_str();
    app.add_flag("--track-energy,!--no-track-energy", sim.track_energy,
                 "reduce conserved quantities every step")
        ->capture_default_str();
    app.add_option("--neighbors", sim.target_neighbors, "target neighbor count")->capture_default_str();
    app.add_option("--omega", run.omega, "patch angular velocity")->capture_default_str();
    app.add_option("--series-terms", run.series_terms, "largest odd index in the pressure series")
        ->capture_default_str();
    app.add_option("--alpha", sim.physics.av.alpha, "artificial viscosity strength")->capture_default_str();
    app.add_option("--courant", sim.physics.courant, "Courant factor")->capture_default_str();
    app.add_option("--bucket", sim.bucket_size, "neighbor tree bucket size")->capture_default_str();
    app.add_option("--global-bucket", sim.global_bucket_size, "domain tree bucket size")
        ->capture_default_str();
    app.add_flag("--uniform-h", uniform_h, "keep smoothing lengths fixed");
    app.add_option("--resume", resume, "resume from a checkpoint file");
    app.add_option("-o,--output", output, "output directory")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int status = app.exit(e);
        return status == 0 ? 0 : 2;
    }

    sim.adaptive_h = !uniform_h;
    run.output_dir = output;
    if (!resume.empty()) run.resume = resume;
    return sph::run(run, std::cout);
}
