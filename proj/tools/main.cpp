// Command-line front end: `pwhid run <config>` and `pwhid synth <config>`.

#include <iostream>

#include <CLI11.hpp>

#include "experiment.hpp"

using namespace pwhid::tools;

int main(int argc, char** argv)
{
    CLI::App app{"Parallel Wiener-Hammerstein identification from Volterra kernels"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    bool quiet = false;

    auto* run = app.add_subcommand("run", "identify a system described by a config");
    auto* synth =
        app.add_subcommand("synth", "write the Volterra kernels of a config system");
    for (auto* sub : {run, synth})
    {
        sub->add_option("config", config, "YAML configuration file")->required();
        sub->add_option("--out", out, "output directory (overrides output_dir)");
        sub->add_flag("--quiet", quiet, "suppress the summary on stdout");
    }

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try
    {
        const auto cfg     = load_config(config);
        const auto out_dir = out.empty() ? cfg.output_dir : std::filesystem::path(out);
        std::ostream* log  = quiet ? nullptr : &std::cout;
        if (run->parsed())
        {
            run_experiment(cfg, out_dir, log);
        }
        else
        {
            synthesize_only(cfg, out_dir, log);
        }
    }
    catch (const ConfigError& e)
    {
        std::cerr << "pwhid: " << config << ": " << e.what() << '\n';
        return exit_config;
    }
    catch (const IoError& e)
    {
        std::cerr << "pwhid: " << e.what() << '\n';
        return exit_io;
    }
    catch (const std::exception& e)
    {
        std::cerr << "pwhid: " << e.what() << '\n';
        return exit_config;
    }
    return exit_ok;
}
