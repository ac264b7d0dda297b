#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pks/pks.hpp"

using nlohmann::json;

namespace {

// exit codes: 0 ok, 1 usage, 2 parse/validation, 3 inconsistent,
// 4 non-convergence, 5 capacity, 6 demo mismatch
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kBadInput = 2;
constexpr int kInconsistent = 3;
constexpr int kNoConvergence = 4;
constexpr int kCapacity = 5;
constexpr int kDemoMismatch = 6;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw pks::validation_error("cannot open file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v) { return pks::format_double(v); }

struct Options {
    std::string format = "text";
    double table_tol = 1e-9;
    bool json() const { return format == "json"; }
};

class Timer {
public:
    double ms() const {
        return std::chrono::duration<double, std::milli>(clock::now() - start_).count();
    }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_ = clock::now();
};

json joint_json(const pks::JointDistribution& p) {
    json desc = json::array();
    for (std::size_t d = 0; d < p.space().size(); ++d)
        desc.push_back({{"name", p.space().name(d)}, {"arity", p.space().arity(d)}});
    json values = json::array();
    for (std::size_t x = 0; x < p.size(); ++x) values.push_back(p[x]);
    return {{"descriptors", desc}, {"values", values}};
}

json classification_json(const pks::Classification& cls, const pks::Structure& structure) {
    json j{{"web", cls.is_web},
           {"forest", cls.is_forest},
           {"conditional_web", cls.is_conditional_web},
           {"bayes_net", cls.is_bayes_net_shape}};
    if (cls.unpack_order) {
        json order = json::array();
        for (std::size_t i : *cls.unpack_order) order.push_back(structure[i].label(structure.space()));
        j["unpack_order"] = order;
    }
    return j;
}

void emit(const Options& opt, const json& machine, const std::string& human) {
    if (opt.json())
        std::cout << machine.dump(2) << "\n";
    else
        std::cout << human;
}

std::string yesno(bool b) { return b ? "yes" : "no"; }

pks::ProbabilitySystem load_system(const std::string& path, const Options& opt,
                                   std::string* digest) {
    const std::string text = read_file(path);
    if (digest) *digest = "fnv1a:" + hex64(fnv1a(text));
    return pks::parse_system(text, opt.table_tol);
}

int run_classify(const std::string& path, const Options& opt) {
    Timer timer;
    std::string digest;
    auto pc = load_system(path, opt, &digest);
    auto cls = pks::classify(pc.structure());

    std::ostringstream human;
    human << "web: " << yesno(cls.is_web) << ", forest: " << yesno(cls.is_forest)
          << ", conditional-web: " << yesno(cls.is_conditional_web)
          << ", bayes-net: " << yesno(cls.is_bayes_net_shape) << "\n";
    if (cls.unpack_order) {
        human << "unpack order (first peeled last):";
        for (std::size_t i : *cls.unpack_order)
            human << " " << pc.structure()[i].label(pc.space());
        human << "\n";
    }
    json machine{{"command", "classify"},
                 {"file", path},
                 {"digest", digest},
                 {"classification", classification_json(cls, pc.structure())}};
    machine["timings"] = {{"total_ms", timer.ms()}};
    emit(opt, machine, human.str());
    return kOk;
}

void print_joint_text(std::ostream& out, const pks::JointDistribution& p) {
    out << "joint\n";
    for (std::size_t d = 0; d < p.space().size(); ++d)
        out << "descriptor " << p.space().name(d) << " " << p.space().arity(d) << "\n";
    out << "values :";
    for (std::size_t x = 0; x < p.size(); ++x) out << " " << fmt(p[x]);
    out << "\n";
}

int run_extend(const std::string& path, const std::string& method, double tol,
               std::size_t max_iter, const Options& opt) {
    Timer timer;
    std::string digest;
    auto pc = load_system(path, opt, &digest);
    pks::ExtensionResult result = [&] {
        if (method == "product") return pks::product_extension(pc);
        pks::SolverConfig cfg;
        cfg.residual_tol = tol;
        cfg.max_iterations = max_iter;
        return pks::maxent_extension(pc, cfg);
    }();

    std::ostringstream human;
    human << "# extend method=" << method << " file=" << path << " digest=" << digest << "\n";
    human << "# iterations: " << result.iterations << "\n";
    human << "# max residual: " << fmt(result.max_residual) << "\n";
    human << "# entropy: " << fmt(result.entropy) << "\n";
    for (const auto& note : result.conversions) human << "# converted: " << note << "\n";
    print_joint_text(human, result.distribution);

    json machine{{"command", "extend"},
                 {"file", path},
                 {"digest", digest},
                 {"method", method},
                 {"iterations", result.iterations},
                 {"max_residual", result.max_residual},
                 {"entropy", result.entropy},
                 {"conversions", result.conversions},
                 {"joint", joint_json(result.distribution)}};
    machine["timings"] = {{"total_ms", timer.ms()}};
    emit(opt, machine, human.str());
    return kOk;
}

int run_check(const std::string& path, const Options& opt) {
    Timer timer;
    std::string digest;
    auto pc = load_system(path, opt, &digest);
    auto rep = pks::is_consistent(pc);

    const char* status = rep.status == pks::ConsistencyStatus::consistent ? "consistent"
                         : rep.status == pks::ConsistencyStatus::inconsistent
                             ? "inconsistent"
                             : "indeterminate";
    std::ostringstream human;
    human << "status: " << status << "\n";
    human << "least total violation: " << fmt(rep.objective) << "\n";
    if (rep.witness) {
        human << "witness residual: " << fmt(rep.max_residual) << "\n";
        human << "witness entropy: " << fmt(rep.witness->entropy()) << "\n";
        for (const auto& row : rep.witness_vacuous_rows)
            human << "vacuous: " << row << " (witness gives the conditioning event ~0 mass)\n";
    }
    for (const auto& c : rep.certificate)
        human << "violated: " << c.tag << " by " << fmt(c.violation) << "\n";

    json machine{{"command", "check"},
                 {"file", path},
                 {"digest", digest},
                 {"status", status},
                 {"consistent", rep.consistent},
                 {"objective", rep.objective},
                 {"max_residual", rep.max_residual}};
    json cert = json::array();
    for (const auto& c : rep.certificate) cert.push_back({{"tag", c.tag}, {"violation", c.violation}});
    machine["certificate"] = cert;
    if (rep.witness) {
        machine["witness"] = joint_json(*rep.witness);
        machine["witness"]["entropy"] = rep.witness->entropy();
        machine["witness"]["vacuous_rows"] = rep.witness_vacuous_rows;
    }
    machine["timings"] = {{"total_ms", timer.ms()}};
    emit(opt, machine, human.str());
    return rep.consistent ? kOk : kInconsistent;
}

int run_info(const std::string& path, const Options& opt) {
    Timer timer;
    std::string digest;
    auto pc = load_system(path, opt, &digest);
    auto info = pks::information(pc);

    std::ostringstream human;
    human << "information: " << fmt(info.value) << " nats\n";
    print_joint_text(human, info.distribution);

    json machine{{"command", "info"},
                 {"file", path},
                 {"digest", digest},
                 {"information", info.value},
                 {"joint", joint_json(info.distribution)}};
    machine["timings"] = {{"total_ms", timer.ms()}};
    emit(opt, machine, human.str());
    return kOk;
}

int run_prune(const std::string& path, const Options& opt) {
    Timer timer;
    std::string digest;
    auto pc = load_system(path, opt, &digest);
    auto result = pks::most_informative_forest(pc);

    auto mask_labels = [&](std::uint64_t mask) {
        std::string s;
        for (std::size_t i = 0; i < pc.structure().size(); ++i)
            if ((mask >> i) & 1u) s += (s.empty() ? "" : ", ") + pc.structure()[i].label(pc.space());
        return s;
    };
    std::ostringstream human;
    human << "best subforest: " << mask_labels(result.best_mask) << "\n";
    human << "information: " << fmt(result.value) << " nats\n";
    if (result.full_value) human << "full information: " << fmt(*result.full_value) << " nats\n";
    if (result.information_loss)
        human << "information loss: " << fmt(*result.information_loss) << " nats\n";
    human << "subforests:\n";
    for (const auto& e : result.evaluations)
        human << "  " << mask_labels(e.mask) << " : " << fmt(e.value) << "\n";

    json subs = json::array();
    for (const auto& e : result.evaluations)
        subs.push_back({{"mask", e.mask}, {"components", mask_labels(e.mask)}, {"value", e.value}});
    json machine{{"command", "prune"},
                 {"file", path},
                 {"digest", digest},
                 {"best", {{"mask", result.best_mask}, {"components", mask_labels(result.best_mask)}}},
                 {"information", result.value},
                 {"subforests", subs}};
    if (result.full_value) machine["full_information"] = *result.full_value;
    if (result.information_loss) machine["information_loss"] = *result.information_loss;
    machine["timings"] = {{"total_ms", timer.ms()}};
    emit(opt, machine, human.str());
    return kOk;
}

int run_entropy(const std::string& path, const Options& opt) {
    Timer timer;
    const std::string text = read_file(path);
    const std::string digest = "fnv1a:" + hex64(fnv1a(text));
    auto p = pks::parse_joint(text, opt.table_tol);
    const double h = p.entropy();

    std::ostringstream human;
    human << "entropy: " << fmt(h) << " nats\n";
    json machine{{"command", "entropy"}, {"file", path}, {"digest", digest}, {"entropy", h}};
    machine["timings"] = {{"total_ms", timer.ms()}};
    emit(opt, machine, human.str());
    return kOk;
}

int run_demo(std::optional<double> tol, const Options& opt) {
    Timer timer;
    auto rep = pks::verify_counterexample(tol);
    const auto& space = rep.system.space();

    std::ostringstream human;
    human << "structure: ";
    for (std::size_t i = 0; i < rep.system.structure().size(); ++i)
        human << (i ? ", " : "") << rep.system.structure()[i].label(space);
    human << "\n";
    human << "classification: web: " << yesno(rep.classification.is_web)
          << ", forest: " << yesno(rep.classification.is_forest)
          << ", conditional-web: " << yesno(rep.classification.is_conditional_web)
          << ", bayes-net: " << yesno(rep.classification.is_bayes_net_shape) << "\n\n";

    human << "state      product     maxent\n";
    for (std::size_t x = 0; x < rep.product.distribution.size(); ++x) {
        auto a = space.assignment_of(x);
        std::string state = "(";
        for (std::size_t d = 0; d < a.size(); ++d) state += (d ? "," : "") + std::to_string(a[d]);
        state += ")";
        human << state << "    " << fmt(rep.product.distribution[x]) << "    "
              << fmt(rep.maxent.distribution[x]) << "\n";
    }
    human << "\nproduct entropy: " << fmt(rep.product.entropy) << " nats\n";
    human << "maxent entropy:  " << fmt(rep.maxent.entropy) << " nats\n";
    human << "p(x1=1 given x3=1) = " << fmt(rep.ci_x1) << "\n";
    human << "p(x2=1 given x3=1) = " << fmt(rep.ci_x2) << "\n";
    human << "p(x1=1,x2=1 given x3=1) = " << fmt(rep.ci_joint)
          << " (independence would require " << fmt(rep.ci_required) << ")\n\n";
    for (const auto& c : rep.checks)
        human << (c.pass ? "PASS" : "FAIL") << " " << c.name << ": got " << fmt(c.got)
              << ", want " << fmt(c.want) << " within " << fmt(c.tol) << "\n";
    human << (rep.all_pass ? "PASS" : "FAIL") << " overall\n";

    json checks = json::array();
    for (const auto& c : rep.checks)
        checks.push_back(
            {{"name", c.name}, {"got", c.got}, {"want", c.want}, {"tol", c.tol}, {"pass", c.pass}});
    json machine{{"command", "demo"},
                 {"classification", classification_json(rep.classification, rep.system.structure())},
                 {"product", {{"entropy", rep.product.entropy}, {"joint", joint_json(rep.product.distribution)}}},
                 {"maxent",
                  {{"entropy", rep.maxent.entropy},
                   {"iterations", rep.maxent.iterations},
                   {"max_residual", rep.maxent.max_residual},
                   {"joint", joint_json(rep.maxent.distribution)}}},
                 {"ci",
                  {{"x1_given_x3", rep.ci_x1},
                   {"x2_given_x3", rep.ci_x2},
                   {"x1_x2_given_x3", rep.ci_joint},
                   {"independence_requires", rep.ci_required}}},
                 {"checks", checks},
                 {"all_pass", rep.all_pass}};
    machine["timings"] = {{"total_ms", timer.ms()}};
    emit(opt, machine, human.str());
    return rep.all_pass ? kOk : kDemoMismatch;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"partial probabilistic knowledge: structures, extensions, consistency"};
    app.require_subcommand(1);

    Options opt;
    app.add_option("--format", opt.format, "output format")
        ->check(CLI::IsMember({"text", "json"}))
        ->capture_default_str();
    app.add_option("--table-tol", opt.table_tol, "row-sum tolerance for table validation")
        ->capture_default_str();

    std::string file;
    std::string method;
    double tol = 1e-8;
    std::size_t max_iter = 100000;
    std::optional<double> demo_tol;
    std::string demo_what;

    auto* classify = app.add_subcommand("classify", "classify a system's structure");
    classify->add_option("file", file, "system file")->required();

    auto* extend = app.add_subcommand("extend", "extend a system to a joint distribution");
    extend->add_option("--method", method, "product or maxent")
        ->required()
        ->check(CLI::IsMember({"product", "maxent"}));
    extend->add_option("--tol", tol, "solver residual tolerance (maxent)")
        ->capture_default_str();
    extend->add_option("--max-iter", max_iter, "solver sweep budget (maxent)")
        ->capture_default_str();
    extend->add_option("file", file, "system file")->required();

    auto* check = app.add_subcommand("check", "check consistency");
    check->add_option("file", file, "system file")->required();

    auto* info = app.add_subcommand("info", "information value (max entropy)");
    info->add_option("file", file, "system file")->required();

    auto* prune = app.add_subcommand("prune", "most informative subforest");
    prune->add_option("file", file, "system file")->required();

    auto* demo = app.add_subcommand("demo", "built-in demonstrations");
    demo->add_option("what", demo_what, "demonstration name")->required();
    double demo_tol_value = 0.0;
    auto* demo_tol_opt =
        demo->add_option("--tol", demo_tol_value, "override every check tolerance");

    auto* entropy = app.add_subcommand("entropy", "entropy of a joint distribution file");
    entropy->add_option("file", file, "joint file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (classify->parsed()) return run_classify(file, opt);
        if (extend->parsed()) return run_extend(file, method, tol, max_iter, opt);
        if (check->parsed()) return run_check(file, opt);
        if (info->parsed()) return run_info(file, opt);
        if (prune->parsed()) return run_prune(file, opt);
        if (demo->parsed()) {
            if (demo_what != "counterexample") {
                std::cerr << "unknown demonstration '" << demo_what
                          << "' (available: counterexample)\n";
                return kUsage;
            }
            if (demo_tol_opt->count() > 0) demo_tol = demo_tol_value;
            return run_demo(demo_tol, opt);
        }
        if (entropy->parsed()) return run_entropy(file, opt);
        return kUsage;
    } catch (const pks::parse_error& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kBadInput;
    } catch (const pks::validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kBadInput;
    } catch (const pks::infeasible_error& e) {
        std::cerr << "inconsistent system: " << e.what() << "\n";
        for (const auto& c : e.report().certificate)
            std::cerr << "  violated: " << c.tag << " by " << pks::format_double(c.violation)
                      << "\n";
        return kInconsistent;
    } catch (const pks::convergence_error& e) {
        std::cerr << "solver did not converge: " << e.what() << "\n";
        return kNoConvergence;
    } catch (const pks::capacity_error& e) {
        std::cerr << "capacity exceeded: " << e.what() << "\n";
        return kCapacity;
    } catch (const pks::domain_error& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kBadInput;
    } catch (const pks::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kBadInput;
    }
}
