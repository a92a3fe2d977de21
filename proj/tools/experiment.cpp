#include "experiment.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

namespace pwhid::tools
{

namespace
{

const std::set<std::string> known_keys = {
    "name",       "rank",           "L1",
    "L2",         "L",              "degree",
    "points",     "point_seed",     "als_seed",
    "max_cycles", "restarts",       "rel_change_tol",
    "pinv_cutoff", "success_threshold", "normalize_each_cycle",
    "parallel_restarts", "A",       "B",
    "C",          "const0",         "kernel_file",
    "output_dir",
};

[[noreturn]] void fail(const YAML::Node& node, const std::string& what)
{
    const auto mark = node.Mark();
    if (mark.is_null())
    {
        throw ConfigError(what);
    }
    throw ConfigError("line " + std::to_string(mark.line + 1) + ": " + what);
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& key)
{
    if (!node.IsScalar())
    {
        fail(node, "'" + key + "' must be a scalar");
    }
    try
    {
        return node.as<T>();
    }
    catch (const YAML::Exception&)
    {
        fail(node, "'" + key + "' has an invalid value '" + node.Scalar() + "'");
    }
}

Index positive(const YAML::Node& root, const std::string& key)
{
    const auto& node = root[key];
    if (!node)
    {
        throw ConfigError("missing required key '" + key + "'");
    }
    const auto v = scalar<long long>(node, key);
    if (v < 1)
    {
        fail(node, "'" + key + "' must be at least 1");
    }
    return static_cast<Index>(v);
}

RMatrix matrix(const YAML::Node& node, const std::string& key, Index rows,
               Index cols)
{
    if (!node.IsSequence() || static_cast<Index>(node.size()) != rows)
    {
        fail(node, "'" + key + "' must be a list of " + std::to_string(rows) +
                       " rows");
    }
    RMatrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
    {
        const auto& row = node[static_cast<std::size_t>(i)];
        if (!row.IsSequence() || static_cast<Index>(row.size()) != cols)
        {
            fail(row, "row " + std::to_string(i + 1) + " of '" + key +
                          "' must have " + std::to_string(cols) + " entries");
        }
        for (Index j = 0; j < cols; ++j)
        {
            m(i, j) = scalar<double>(row[static_cast<std::size_t>(j)], key);
        }
    }
    return m;
}

void write_matrix(std::ostream& out, const std::string& indent,
                  const std::string& key, const RMatrix& m)
{
    out << indent << key << ": [";
    for (Index i = 0; i < m.rows(); ++i)
    {
        out << (i ? ", [" : "[");
        for (Index j = 0; j < m.cols(); ++j)
        {
            out << (j ? ", " : "") << format_double(m(i, j));
        }
        out << ']';
    }
    out << "]\n";
}

void write_vector(std::ostream& out, const std::string& indent,
                  const std::string& key, const RVector& v)
{
    out << indent << key << ": [";
    for (Index i = 0; i < v.size(); ++i)
    {
        out << (i ? ", " : "") << format_double(v[i]);
    }
    out << "]\n";
}

std::ofstream open_output(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

void close_output(std::ofstream& out, const std::filesystem::path& path)
{
    out.close();
    if (!out)
    {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

void ensure_dir(const std::filesystem::path& dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
    {
        throw IoError("cannot create output directory '" + dir.string() +
                      "': " + ec.message());
    }
}

std::string restart_csv_name(std::size_t index)
{
    std::ostringstream name;
    name << "residuals_restart_" << std::setw(2) << std::setfill('0')
         << index + 1 << ".csv";
    return name.str();
}

} // namespace

ExperimentConfig parse_config(const std::string& text,
                              const std::filesystem::path& base_dir)
{
    YAML::Node root;
    try
    {
        root = YAML::Load(text);
    }
    catch (const YAML::ParserException& e)
    {
        throw ConfigError("line " + std::to_string(e.mark.line + 1) + ": " +
                          e.msg);
    }
    if (!root.IsMap())
    {
        throw ConfigError("configuration must be a mapping of keys to values");
    }
    for (const auto& kv : root)
    {
        const auto key = kv.first.as<std::string>();
        if (!known_keys.count(key))
        {
            fail(kv.first, "unknown key '" + key + "'");
        }
    }

    ExperimentConfig cfg;
    cfg.name   = root["name"] ? scalar<std::string>(root["name"], "name")
                              : std::string("experiment");
    cfg.rank   = positive(root, "rank");
    cfg.L1     = positive(root, "L1");
    cfg.L2     = positive(root, "L2");
    cfg.degree = positive(root, "degree");
    cfg.points = positive(root, "points");

    if (root["L"])
    {
        const auto L = scalar<long long>(root["L"], "L");
        if (L != cfg.L1 + cfg.L2 - 1)
        {
            fail(root["L"], "L = " + std::to_string(L) +
                                " is inconsistent with L1 + L2 - 1 = " +
                                std::to_string(cfg.L1 + cfg.L2 - 1));
        }
    }

    for (const char* key : {"point_seed", "als_seed"})
    {
        if (!root[key])
        {
            throw ConfigError(std::string("missing required key '") + key +
                              "' (all seeds must be explicit)");
        }
    }
    cfg.point_seed = scalar<std::uint64_t>(root["point_seed"], "point_seed");
    cfg.als.seed   = scalar<std::uint64_t>(root["als_seed"], "als_seed");

    if (root["max_cycles"])
        cfg.als.max_cycles = static_cast<int>(positive(root, "max_cycles"));
    if (root["restarts"])
        cfg.als.restarts = static_cast<int>(positive(root, "restarts"));
    for (auto [key, field] :
         {std::pair{"rel_change_tol", &cfg.als.rel_change_tol},
          std::pair{"pinv_cutoff", &cfg.als.pinv_cutoff},
          std::pair{"success_threshold", &cfg.als.success_threshold}})
    {
        if (root[key])
        {
            *field = scalar<double>(root[key], key);
            if (!(*field > 0.0))
            {
                fail(root[key], std::string("'") + key + "' must be > 0");
            }
        }
    }
    if (root["normalize_each_cycle"])
        cfg.als.normalize_each_cycle =
            scalar<bool>(root["normalize_each_cycle"], "normalize_each_cycle");
    if (root["parallel_restarts"])
        cfg.als.parallel_restarts =
            scalar<bool>(root["parallel_restarts"], "parallel_restarts");

    const bool has_system = root["A"] || root["B"] || root["C"] || root["const0"];
    const bool has_file   = static_cast<bool>(root["kernel_file"]);
    if (has_system == has_file)
    {
        throw ConfigError("exactly one of a system (A, B, C) or 'kernel_file' "
                          "must be given");
    }
    if (has_system)
    {
        for (const char* key : {"A", "B", "C"})
        {
            if (!root[key])
            {
                throw ConfigError(std::string("system is missing '") + key + "'");
            }
        }
        PWHSystem sys;
        sys.A = matrix(root["A"], "A", cfg.L1, cfg.rank);
        sys.B = matrix(root["B"], "B", cfg.L2, cfg.rank);
        sys.C = matrix(root["C"], "C", cfg.degree, cfg.rank);
        sys.const0 = RVector::Zero(cfg.rank);
        if (root["const0"])
        {
            const auto& node = root["const0"];
            if (!node.IsSequence() ||
                static_cast<Index>(node.size()) != cfg.rank)
            {
                fail(node, "'const0' must list one value per branch");
            }
            for (Index l = 0; l < cfg.rank; ++l)
            {
                sys.const0[l] =
                    scalar<double>(node[static_cast<std::size_t>(l)], "const0");
            }
        }
        try
        {
            sys.validate();
        }
        catch (const std::exception& e)
        {
            fail(root["A"], e.what());
        }
        cfg.system = std::move(sys);
    }
    else
    {
        std::filesystem::path p =
            scalar<std::string>(root["kernel_file"], "kernel_file");
        cfg.kernel_file = p.is_relative() ? base_dir / p : p;
    }

    cfg.output_dir = root["output_dir"]
                         ? base_dir / scalar<std::string>(root["output_dir"],
                                                          "output_dir")
                         : std::filesystem::path("out") / cfg.name;
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw IoError("cannot open config '" + path.string() + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.parent_path());
}

VolterraKernelSet config_kernels(const ExperimentConfig& cfg)
{
    if (cfg.system)
    {
        return synthesize_kernels(*cfg.system);
    }
    std::ifstream in(*cfg.kernel_file, std::ios::binary);
    if (!in)
    {
        throw IoError("cannot open kernel file '" + cfg.kernel_file->string() +
                      "'");
    }
    VolterraKernelSet k;
    try
    {
        k = read_kernels(in);
    }
    catch (const ParseError& e)
    {
        throw ConfigError(cfg.kernel_file->string() + ": " + e.what());
    }
    if (k.memory_length() != cfg.L1 + cfg.L2 - 1 || k.degree() != cfg.degree)
    {
        throw ConfigError(cfg.kernel_file->string() + ": kernel file has L = " +
                          std::to_string(k.memory_length()) + ", d = " +
                          std::to_string(k.degree()) +
                          " but the config implies L = " +
                          std::to_string(cfg.L1 + cfg.L2 - 1) + ", d = " +
                          std::to_string(cfg.degree));
    }
    return k;
}

void write_report(std::ostream& out, const ExperimentConfig& cfg,
                  const IdentificationReport& rep)
{
    const auto& als = rep.als;
    out << "name: " << cfg.name << '\n';
    out << "rank: " << cfg.rank << '\n';
    out << "L1: " << cfg.L1 << '\n';
    out << "L2: " << cfg.L2 << '\n';
    out << "degree: " << cfg.degree << '\n';
    out << "points: " << cfg.points << '\n';
    out << "measurements: " << rep.measurements << '\n';
    out << "unknowns: " << rep.unknowns << '\n';
    out << "row_unknown_ratio: "
        << format_double(static_cast<double>(rep.measurements) /
                         static_cast<double>(rep.unknowns))
        << '\n';
    out << "flagged: " << (rep.flagged() ? "true" : "false") << '\n';

    out << "als:\n";
    out << "  best_restart: " << als.best_restart + 1 << '\n';
    out << "  final_residual: " << format_double(als.final_residual()) << '\n';
    out << "  converged: " << (als.converged ? "true" : "false") << '\n';
    out << "  cycles_used: " << als.cycles_used << '\n';
    out << "  restarts:\n";
    for (std::size_t i = 0; i < als.runs.size(); ++i)
    {
        const auto& run = als.runs[i];
        out << "    - {index: " << i + 1
            << ", final_residual: " << format_double(run.final_residual())
            << ", cycles: " << run.cycles_used
            << ", converged: " << (run.converged ? "true" : "false")
            << ", min_rank: " << run.min_rank << "}\n";
    }

    out << "estimate:\n";
    write_matrix(out, "  ", "A", rep.estimate.A);
    write_matrix(out, "  ", "B", rep.estimate.B);
    write_matrix(out, "  ", "C", rep.estimate.C);
    out << "max_filter_imag: " << format_double(rep.max_filter_imag) << '\n';
    out << "max_coeff_imag: " << format_double(rep.max_coeff_imag) << '\n';
    out << "derivative_polynomials:\n";
    for (const auto& p : rep.derivative_polynomials)
    {
        write_vector(out, "  - ", "coefficients", p);
    }

    out << "raw_factors:\n";
    write_matrix(out, "  ", "A_re", rep.raw.A.real());
    write_matrix(out, "  ", "A_im", rep.raw.A.imag());
    write_matrix(out, "  ", "B_re", rep.raw.B.real());
    write_matrix(out, "  ", "B_im", rep.raw.B.imag());
    write_matrix(out, "  ", "H_re", rep.raw.H.real());
    write_matrix(out, "  ", "H_im", rep.raw.H.imag());

    if (rep.match)
    {
        const auto& m = *rep.match;
        RVector perm(static_cast<Index>(m.permutation.size()));
        for (std::size_t l = 0; l < m.permutation.size(); ++l)
        {
            perm[static_cast<Index>(l)] = static_cast<double>(m.permutation[l] + 1);
        }
        out << "alignment:\n";
        write_vector(out, "  ", "permutation", perm);
        write_vector(out, "  ", "a_scale", m.a_scale);
        write_vector(out, "  ", "b_scale", m.b_scale);
        write_vector(out, "  ", "a_error", m.a_error);
        write_vector(out, "  ", "b_error", m.b_error);
        write_vector(out, "  ", "c_error", m.c_error);
    }
}

void write_summary_json(std::ostream& out, const ExperimentConfig& cfg,
                        const IdentificationReport& rep)
{
    nlohmann::ordered_json j;
    j["name"]           = cfg.name;
    j["best_restart"]   = rep.als.best_restart + 1;
    j["final_residual"] = rep.als.final_residual();
    j["converged"]      = rep.als.converged;
    j["flagged"]        = rep.flagged();
    auto& runs          = j["restart_residuals"] = nlohmann::ordered_json::array();
    for (const auto& run : rep.als.runs)
    {
        runs.push_back(run.final_residual());
    }
    j["max_filter_imag"] = rep.max_filter_imag;
    if (rep.match)
    {
        const auto& m = *rep.match;
        auto vec      = [](const RVector& v) {
            return std::vector<double>(v.data(), v.data() + v.size());
        };
        j["a_error"] = vec(m.a_error);
        j["b_error"] = vec(m.b_error);
        j["c_error"] = vec(m.c_error);
    }
    out << j.dump(2) << '\n';
}

void write_human_summary(std::ostream& out, const ExperimentConfig& cfg,
                         const IdentificationReport& rep)
{
    const auto& als = rep.als;
    out << cfg.name << ": r = " << cfg.rank << ", L1 = " << cfg.L1
        << ", L2 = " << cfg.L2 << ", d = " << cfg.degree << ", N = " << cfg.points
        << '\n';
    out << "  " << rep.measurements << " measurements for " << rep.unknowns
        << " unknowns\n";
    std::size_t ok = 0;
    for (const auto& run : als.runs)
    {
        ok += run.converged ? 1 : 0;
    }
    out << "  " << ok << " of " << als.runs.size()
        << " restarts converged; best residual "
        << format_double(als.final_residual()) << " (restart "
        << als.best_restart + 1 << ")\n";
    out << "  estimated filters and polynomial coefficients (unit-norm filters):\n";
    for (Index l = 0; l < rep.estimate.rank(); ++l)
    {
        out << "    branch " << l + 1 << ": a = (";
        for (Index i = 0; i < rep.estimate.A.rows(); ++i)
            out << (i ? ", " : "") << std::setprecision(6) << rep.estimate.A(i, l);
        out << "), b = (";
        for (Index i = 0; i < rep.estimate.B.rows(); ++i)
            out << (i ? ", " : "") << rep.estimate.B(i, l);
        out << "), c = (";
        for (Index i = 0; i < rep.estimate.C.rows(); ++i)
            out << (i ? ", " : "") << rep.estimate.C(i, l);
        out << ")\n";
    }
    if (rep.match)
    {
        out << "  aligned relative errors: filters "
            << format_double(rep.match->max_filter_error()) << ", coefficients "
            << format_double(rep.match->c_error.maxCoeff()) << '\n';
    }
    if (rep.flagged())
    {
        out << "  WARNING: identification flagged (ALS did not reach the "
               "success threshold or a branch is unreliable)\n";
    }
}

IdentificationReport run_experiment(const ExperimentConfig& cfg,
                                    const std::filesystem::path& out_dir,
                                    std::ostream* log)
{
    const auto kernels = config_kernels(cfg);
    ensure_dir(out_dir);

    if (cfg.system)
    {
        const auto path = out_dir / "kernels.txt";
        auto out        = open_output(path);
        write_kernels(out, kernels);
        close_output(out, path);
    }

    IdentificationOptions opts;
    opts.point_seed = cfg.point_seed;
    opts.als        = cfg.als;
    auto rep = identify(kernels, cfg.rank, cfg.L1, cfg.L2, cfg.points, opts,
                        cfg.system);

    auto emit = [&](const std::string& name, auto&& writer) {
        const auto path = out_dir / name;
        auto out        = open_output(path);
        writer(out);
        close_output(out, path);
    };

    for (std::size_t i = 0; i < rep.als.runs.size(); ++i)
    {
        emit(restart_csv_name(i), [&](std::ostream& o) {
            write_residual_csv(o, rep.als.runs[i].residual_history);
        });
    }
    emit("points.txt", [&](std::ostream& o) { write_points(o, rep.points); });
    emit("sampling_matrix.txt", [&](std::ostream& o) {
        write_triplets(o, build_sampling_matrix(cfg.L1, cfg.L2, cfg.degree,
                                                rep.points));
    });
    emit("report.yaml", [&](std::ostream& o) { write_report(o, cfg, rep); });
    emit("summary.json", [&](std::ostream& o) { write_summary_json(o, cfg, rep); });

    if (log)
    {
        write_human_summary(*log, cfg, rep);
        *log << "  artifacts written to " << out_dir.string() << '\n';
    }
    return rep;
}

void synthesize_only(const ExperimentConfig& cfg,
                     const std::filesystem::path& out_dir, std::ostream* log)
{
    if (!cfg.system)
    {
        throw ConfigError("'synth' needs a system (A, B, C) in the config");
    }
    ensure_dir(out_dir);
    const auto path = out_dir / "kernels.txt";
    auto out        = open_output(path);
    write_kernels(out, synthesize_kernels(*cfg.system));
    close_output(out, path);
    if (log)
    {
        *log << "kernels written to " << path.string() << '\n';
    }
}

} // namespace pwhid::tools
