///
/// \file experiment.hpp
///
/// Configuration-driven identification runs for the command-line tool.
///
#ifndef PWHID_TOOLS_EXPERIMENT_HPP
#define PWHID_TOOLS_EXPERIMENT_HPP

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

#include <pwhid/pwhid.hpp>

namespace pwhid::tools
{

/// Invalid configuration; the message starts with the offending line.
class ConfigError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// File could not be read or written.
class IoError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig
{
    std::string name;
    Index rank   = 0;
    Index L1     = 0;
    Index L2     = 0;
    Index degree = 0;
    Index points = 0;
    std::uint64_t point_seed = 0;
    ALSOptions als;

    /// Exactly one of these two is set.
    std::optional<PWHSystem> system;
    std::optional<std::filesystem::path> kernel_file;

    std::filesystem::path output_dir;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text,
                              const std::filesystem::path& base_dir = {});

enum ExitCode : int
{
    exit_ok     = 0,
    exit_config = 1,
    exit_io     = 2,
};

/// Kernels named by the config: synthesized from the system or read from file.
VolterraKernelSet config_kernels(const ExperimentConfig& cfg);

void write_report(std::ostream& out, const ExperimentConfig& cfg,
                  const IdentificationReport& rep);
void write_summary_json(std::ostream& out, const ExperimentConfig& cfg,
                        const IdentificationReport& rep);
void write_human_summary(std::ostream& out, const ExperimentConfig& cfg,
                         const IdentificationReport& rep);

///
/// Identification run. Writes report.yaml, summary.json,
/// residuals_restart_NN.csv, points.txt, sampling_matrix.txt and, for a
/// system config, kernels.txt into `out_dir`. Throws ConfigError or IoError.
///
IdentificationReport run_experiment(const ExperimentConfig& cfg,
                                    const std::filesystem::path& out_dir,
                                    std::ostream* log);

/// Writes kernels.txt only. Requires a system config.
void synthesize_only(const ExperimentConfig& cfg,
                     const std::filesystem::path& out_dir, std::ostream* log);

} // namespace pwhid::tools

#endif /* PWHID_TOOLS_EXPERIMENT_HPP */
