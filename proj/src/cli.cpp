#include "lightning/cli.hpp"

#include "lightning/config.hpp"
#include "lightning/report.hpp"

#include <CLI11.hpp>

#include <optional>
#include <sstream>

namespace lightning {

namespace {

struct Common {
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::vector<double> parse_grid(const std::string& flag, const std::string& spec)
{
    // lo:hi:step
    std::vector<double> parts;
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ':');) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw UsageError(flag + ": expected lo:hi:step, got '" + spec + "'");
        }
    }
    if (parts.size() != 3 || parts[2] <= 0.0 || parts[1] < parts[0]) {
        throw UsageError(flag + ": expected lo:hi:step with lo <= hi and step > 0, got '" + spec + "'");
    }
    return grid_range(parts[0], parts[1], parts[2]);
}

Dataset load_data(const Model& model, const std::filesystem::path& images, const std::filesystem::path& labels,
                  std::size_t limit)
{
    Dataset d = conform(load_idx(images, labels), model);
    if (limit) {
        d = d.slice(0, limit);
    }
    if (d.empty()) {
        throw std::runtime_error("data set " + images.string() + " is empty");
    }
    return d;
}

void apply_common(RunConfig& rc, const Common& c)
{
    if (c.seed) {
        rc.campaign.seed = *c.seed;
        rc.sample_seed = *c.seed;
        rc.evolve.ga.seed = *c.seed;
        rc.evolve.eval_seed = *c.seed;
    }
    rc.campaign.jobs = c.jobs;
    rc.evolve.ga.jobs = c.jobs;
}

Provenance provenance_for(const std::string& command, std::uint64_t seed, const std::string& text)
{
    return {command, seed, config_hash(command + "\n" + text)};
}

Dataset independent_sample(const RunConfig& rc, const Model& model, const Dataset& fallback)
{
    if (!rc.train_images.empty() && !rc.train_labels.empty()) {
        return subsample(load_data(model, rc.train_images, rc.train_labels, 0), rc.sample_size, rc.sample_seed);
    }
    return subsample(fallback, rc.sample_size, rc.sample_seed);
}

void write_campaign_outputs(const RunConfig& rc, const CampaignReport& rep, const Provenance& prov,
                            std::ostream& out)
{
    out << summary_text(rep);
    if (!rc.out_summary.empty()) {
        write_text(rc.out_summary, summary_csv(prov, rep));
    }
    if (!rc.out_confusion.empty()) {
        write_text(rc.out_confusion, confusion_csv(prov, rep));
    }
    if (!rc.out_records.empty()) {
        write_text(rc.out_records, records_jsonl(prov, rep.records, rep.classes));
    }
}

int cmd_attack(const std::string& config_path, std::optional<std::size_t> target_class, bool baseline,
               const Common& common, std::ostream& out)
{
    RunConfig rc = load_run_config(config_path);
    apply_common(rc, common);
    if (target_class) {
        rc.campaign.targeted = true;
        rc.campaign.target_class = target_class;
    }
    if (baseline) {
        rc.campaign.source = TargetSource::RandomFault;
        rc.campaign.targeted = false;
        rc.campaign.target_class.reset();
    } else if (rc.campaign.source == TargetSource::RandomFault) {
        throw UsageError("attack: source random_fault belongs to the baseline command");
    }
    rc.campaign.keep_records = !rc.out_records.empty();
    const Model model = load_model(rc.model);
    const Dataset data = load_data(model, rc.data_images, rc.data_labels, rc.data_limit);
    std::optional<Dataset> sample;
    if (rc.campaign.source == TargetSource::Independent) {
        sample = independent_sample(rc, model, data);
    }
    const auto rep = run_campaign(model, data, rc.campaign, rc.profile, rc.params, sample ? &*sample : nullptr);
    std::string text = rc.text;
    if (target_class) {
        text += "cli.target_class=" + std::to_string(*target_class) + "\n";
    }
    const std::string command = baseline ? "baseline" : "attack";
    write_campaign_outputs(rc, rep, provenance_for(command, rc.campaign.seed, text), out);
    return 0;
}

int cmd_evolve(const std::string& config_path, const Common& common, std::ostream& out)
{
    RunConfig rc = load_run_config(config_path);
    apply_common(rc, common);
    const Model model = load_model(rc.model);
    const Dataset data = load_data(model, rc.data_images, rc.data_labels, rc.data_limit);
    const Dataset fit_data = data.slice(0, rc.evolve.fitness_inputs);
    const Dataset sample = independent_sample(rc, model, data);

    FitnessContext ctx;
    ctx.model = &model;
    ctx.data = &fit_data;
    CampaignConfig search = rc.campaign;
    search.targeted = false;
    ctx.targets = independent_targets(model, sample, search, std::nullopt);
    ctx.profile = rc.profile;
    ctx.base = rc.params;
    ctx.trials = rc.evolve.fitness_trials;
    ctx.eval_seed = rc.evolve.eval_seed;

    const auto schedule = build_schedule(model, rc.profile, rc.params.F_G);
    const SeedRanges ranges = SeedRanges::from_profile(rc.profile, schedule.total);
    const double t_w = rc.evolve.rough_t_w ? *rc.evolve.rough_t_w : planned_first_wait(ctx, rc.params.T_d);
    Rng init = Rng(rc.evolve.ga.seed).split(0xffffffffu);
    const auto pop = initial_population(make_seed(rc.params.F_h, rc.params.V_l, t_w, rc.params.T_d),
                                        rc.evolve.ga.population, ranges, init);
    const auto result =
        refine_parameters(pop, [&](const Seed& s) { return fitness(s, ctx); }, rc.evolve.ga, ranges);

    const auto& b = result.best;
    out << "best fitness " << result.best_fitness << " points after " << result.trace.size() << " generations ("
        << result.evaluations << " evaluations)\n";
    out << "F_h " << b.F_h() << " MHz, V_l " << b.V_l() << " mV, T_W " << b.T_W() << " ms, T_d " << b.T_d()
        << " ms\n";
    if (!rc.evolve.out_trace.empty()) {
        write_text(rc.evolve.out_trace, trace_csv(provenance_for("evolve", rc.evolve.ga.seed, rc.text), result));
    }
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Simulated DVFS fault attacks on CNN inference", "lightning-sim"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", std::string(tool_version()));
    Common common;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Seed for all randomness (overrides config seeds)");
    app.add_option("--jobs", common.jobs, "Worker threads")->check(CLI::Range(1u, 256u));

    // sensitivity
    auto* sens = app.add_subcommand("sensitivity", "Rank sensitive targets");
    std::string s_model, s_data, s_labels, s_gran = "element", s_mode = "dep", s_out;
    std::size_t s_n = 10, s_input = 0, s_sample = 256;
    std::optional<std::size_t> s_target;
    sens->add_option("--model", s_model, "LSNM model file")->required();
    sens->add_option("--data", s_data, "IDX image file")->required();
    sens->add_option("--labels", s_labels, "IDX label file")->required();
    sens->add_option("--granularity", s_gran, "element|exponent|mantissa|part|bit");
    sens->add_option("--mode", s_mode, "dep|indep")->check(CLI::IsMember({"dep", "indep"}));
    sens->add_option("--n", s_n, "Targets to keep")->check(CLI::PositiveNumber);
    sens->add_option("--input", s_input, "Input index for dep mode");
    sens->add_option("--sample-size", s_sample, "Inputs summed in indep mode")->check(CLI::PositiveNumber);
    sens->add_option("--target-class", s_target, "Rank flips that push toward this class");
    sens->add_option("--out", s_out, "Output CSV")->required();

    // attack / baseline / evolve
    auto* attack = app.add_subcommand("attack", "Run an attack campaign");
    std::string a_config;
    std::optional<std::size_t> a_target;
    attack->add_option("--config", a_config, "Campaign config")->required();
    attack->add_option("--target-class", a_target, "Targeted attack toward this class");
    auto* baseline = app.add_subcommand("baseline", "Random-fault baseline campaign");
    std::string b_config;
    baseline->add_option("--config", b_config, "Campaign config")->required();
    auto* evolve = app.add_subcommand("evolve", "Genetic refinement of glitch parameters");
    std::string e_config;
    evolve->add_option("--config", e_config, "Campaign config")->required();

    // calibrate
    auto* calib = app.add_subcommand("calibrate", "Sweep (V_l, F_h) cells");
    std::string c_profile = "default", c_v = "550:790:20", c_f = "1500:1970:47", c_out;
    double c_td = 2.0;
    std::uint64_t c_trials = 1000;
    calib->add_option("--profile", c_profile, "default, ideal or a profile file");
    calib->add_option("--v-grid", c_v, "V_l grid lo:hi:step (mV)");
    calib->add_option("--f-grid", c_f, "F_h grid lo:hi:step (MHz)");
    calib->add_option("--td", c_td, "Glitch duration (ms)")->check(CLI::PositiveNumber);
    calib->add_option("--trials", c_trials, "Glitches per cell")->check(CLI::PositiveNumber);
    calib->add_option("--out", c_out, "Output CSV")->required();

    // report
    auto* report = app.add_subcommand("report", "Summarise a records file");
    std::string r_in, r_confusion;
    report->add_option("--in", r_in, "JSON-lines records")->required()->check(CLI::ExistingFile);
    report->add_option("--confusion", r_confusion, "Confusion CSV (default: <in>.confusion.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << tool_version() << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << app.help();
        return 1;
    }
    if (*seed_opt) {
        common.seed = seed_value;
    }

    try {
        if (*sens) {
            const Scheme scheme = parse_scheme(s_gran);
            const Model model = load_model(s_model);
            const Dataset data = load_data(model, s_data, s_labels, 0);
            TargetSet top;
            if (s_mode == "dep") {
                if (s_input >= data.size()) {
                    throw UsageError("--input " + std::to_string(s_input) + " is outside the data set");
                }
                const Objective obj = s_target ? Objective::toward(*s_target)
                                               : Objective::untargeted(data.labels[s_input]);
                top = input_dependent_search(model, data.inputs[s_input], obj, s_n, scheme);
            } else {
                DatasetObjective obj;
                if (s_target) {
                    obj.targeted = true;
                    obj.target_class = *s_target;
                }
                const Dataset sample = subsample(data, s_sample, common.seed.value_or(0));
                top = input_independent_search(model, sample, obj, s_n, scheme, common.jobs);
            }
            std::ostringstream flags;
            flags << "model=" << s_model << "\ndata=" << s_data << "\nlabels=" << s_labels << "\ngranularity=" << s_gran
                  << "\nmode=" << s_mode << "\nn=" << s_n << "\ninput=" << s_input << "\nsample=" << s_sample
                  << "\ntarget=" << (s_target ? std::to_string(*s_target) : "none") << '\n';
            write_text(s_out, sensitivity_csv(provenance_for("sensitivity", common.seed.value_or(0), flags.str()),
                                              top.targets));
            out << top.size() << " targets written to " << s_out << '\n';
            return 0;
        }
        if (*attack) {
            return cmd_attack(a_config, a_target, false, common, out);
        }
        if (*baseline) {
            return cmd_attack(b_config, std::nullopt, true, common, out);
        }
        if (*evolve) {
            return cmd_evolve(e_config, common, out);
        }
        if (*calib) {
            const auto v = parse_grid("--v-grid", c_v);
            const auto f = parse_grid("--f-grid", c_f);
            const DeviceProfile profile = resolve_profile(c_profile);
            const std::uint64_t seed = common.seed.value_or(profile.seed);
            const auto cells = calibrate_sweep(profile, v, f, c_td, c_trials, seed, common.jobs);
            std::ostringstream flags;
            flags << format_profile(profile) << "v_grid=" << c_v << "\nf_grid=" << c_f << "\ntd=" << c_td
                  << "\ntrials=" << c_trials << '\n';
            write_text(c_out, calibration_csv(provenance_for("calibrate", seed, flags.str()), cells));
            FaultParams safe;
            for (const auto& s : summarize_corridors(cells, safe.F_G, safe.V_G)) {
                out << s.name << ": faulting cells " << s.faulting_cells << ", best single-bit rate "
                    << s.best_single_bit << ", failure there " << s.failure_at_best << '\n';
            }
            return 0;
        }
        if (*report) {
            std::size_t classes = 0;
            Provenance prov;
            const auto records = parse_records_jsonl(read_text_file(r_in), classes, prov);
            const auto rep = tally_trials(records, classes);
            out << summary_text(rep);
            const std::string path = r_confusion.empty() ? r_in + ".confusion.csv" : r_confusion;
            prov.command = "report";
            write_text(path, confusion_csv(prov, rep));
            out << "confusion matrix written to " << path << '\n';
            return 0;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}

} // namespace lightning
