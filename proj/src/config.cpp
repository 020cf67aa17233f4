#include "lightning/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace lightning {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double to_double(const std::string& key, const std::string& v)
{
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v)
{
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::pair<double, double>> to_pairs(const std::string& key, const std::string& v)
{
    std::vector<std::pair<double, double>> out;
    std::stringstream ss(v);
    for (std::string item; std::getline(ss, item, ',');) {
        const std::string t(trim(item));
        const auto colon = t.find(':');
        if (colon == std::string::npos) {
            throw ConfigError(key + ": expected MHz:mV pairs, got '" + t + "'");
        }
        out.emplace_back(to_double(key, std::string(trim(t.substr(0, colon)))),
                         to_double(key, std::string(trim(t.substr(colon + 1)))));
    }
    return out;
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

std::map<std::string, Setter> profile_setters(DeviceProfile& p)
{
    auto num = [](double& field) {
        return Setter([&field](const std::string& k, const std::string& v) { field = to_double(k, v); });
    };
    std::map<std::string, Setter> s{
        {"boundary_intercept", num(p.boundary_intercept)},
        {"boundary_slope", num(p.boundary_slope)},
        {"stress_scale", num(p.stress_scale)},
        {"crash_dose", num(p.crash_dose)},
        {"crash_width", num(p.crash_width)},
        {"noresp_dose", num(p.noresp_dose)},
        {"noresp_width", num(p.noresp_width)},
        {"fault_rate", num(p.fault_rate)},
        {"ms_per_mac", num(p.ms_per_mac)},
        {"reference_mhz", num(p.reference_mhz)},
        {"jitter_ms", num(p.jitter_ms)},
        {"v_min", num(p.v_min)},
        {"v_max", num(p.v_max)},
        {"f_min", num(p.f_min)},
        {"f_max", num(p.f_max)},
        {"td_min", num(p.td_min)},
        {"td_max", num(p.td_max)},
    };
    s["name"] = [&p](const std::string&, const std::string& v) { p.name = v; };
    s["crashes"] = [&p](const std::string& k, const std::string& v) { p.crashes = to_bool(k, v); };
    s["max_bits_per_glitch"] = [&p](const std::string& k, const std::string& v) {
        const auto n = to_u64(k, v);
        if (n > 0xffffffffu) {
            throw ConfigError(k + ": value too large");
        }
        p.max_bits_per_glitch = static_cast<std::uint32_t>(n);
    };
    s["seed"] = [&p](const std::string& k, const std::string& v) { p.seed = to_u64(k, v); };
    s["reference_pairs"] = [&p](const std::string& k, const std::string& v) { p.reference_pairs = to_pairs(k, v); };
    return s;
}

DeviceProfile base_profile(const std::string& name)
{
    if (name == "default") {
        return DeviceProfile::default_profile();
    }
    if (name == "ideal") {
        return DeviceProfile::ideal_profile();
    }
    throw ConfigError("unknown base profile '" + name + "' (expected default or ideal)");
}

void apply_profile_key(DeviceProfile& p, const std::string& key, const std::string& value, const std::string& origin)
{
    auto setters = profile_setters(p);
    const auto it = setters.find(key);
    if (it == setters.end()) {
        throw ConfigError(origin + ": unknown profile key '" + key + "'");
    }
    it->second(key, value);
}

void validate_profile(const DeviceProfile& p, const std::string& origin)
{
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(origin + ": " + e.what());
    }
}

std::string format_number(double v)
{
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

} // namespace

std::map<std::string, std::string> parse_key_values(std::string_view text, const std::string& origin)
{
    std::map<std::string, std::string> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        const std::string where = origin + ":" + std::to_string(line_no);
        if (eq == std::string_view::npos) {
            throw ConfigError(where + ": expected key = value");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) {
            throw ConfigError(where + ": empty key");
        }
        if (!out.emplace(key, value).second) {
            throw ConfigError(where + ": duplicate key '" + key + "'");
        }
    }
    return out;
}

DeviceProfile parse_profile(std::string_view text, const std::string& origin)
{
    auto kv = parse_key_values(text, origin);
    DeviceProfile p = base_profile(kv.count("base") ? kv.at("base") : "default");
    kv.erase("base");
    for (const auto& [k, v] : kv) {
        apply_profile_key(p, k, v, origin);
    }
    validate_profile(p, origin);
    return p;
}

DeviceProfile load_profile(const std::filesystem::path& path)
{
    return parse_profile(read_text(path), path.string());
}

DeviceProfile resolve_profile(const std::string& name_or_path)
{
    if (name_or_path == "default" || name_or_path == "ideal") {
        return base_profile(name_or_path);
    }
    return load_profile(name_or_path);
}

std::string format_profile(const DeviceProfile& p)
{
    std::ostringstream ss;
    ss << "name = " << p.name << '\n';
    ss << "reference_pairs = ";
    for (std::size_t i = 0; i < p.reference_pairs.size(); ++i) {
        ss << (i ? ", " : "") << format_number(p.reference_pairs[i].first) << ':'
           << format_number(p.reference_pairs[i].second);
    }
    ss << '\n';
    const std::pair<const char*, double> nums[] = {
        {"boundary_intercept", p.boundary_intercept}, {"boundary_slope", p.boundary_slope},
        {"stress_scale", p.stress_scale},             {"crash_dose", p.crash_dose},
        {"crash_width", p.crash_width},               {"noresp_dose", p.noresp_dose},
        {"noresp_width", p.noresp_width},             {"fault_rate", p.fault_rate},
        {"ms_per_mac", p.ms_per_mac},                 {"reference_mhz", p.reference_mhz},
        {"jitter_ms", p.jitter_ms},                   {"v_min", p.v_min},
        {"v_max", p.v_max},                           {"f_min", p.f_min},
        {"f_max", p.f_max},                           {"td_min", p.td_min},
        {"td_max", p.td_max},
    };
    for (const auto& [k, v] : nums) {
        ss << k << " = " << format_number(v) << '\n';
    }
    ss << "crashes = " << (p.crashes ? "true" : "false") << '\n';
    ss << "max_bits_per_glitch = " << p.max_bits_per_glitch << '\n';
    ss << "seed = " << p.seed << '\n';
    return ss.str();
}

RunConfig parse_run_config(std::string_view text, const std::string& origin, const std::filesystem::path& base_dir)
{
    const auto kv = parse_key_values(text, origin);
    RunConfig rc;
    auto path = [&](std::filesystem::path& field) {
        return Setter([&field, &base_dir](const std::string&, const std::string& v) {
            const std::filesystem::path p(v);
            field = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
        });
    };
    auto out_path = [](std::filesystem::path& field) {
        return Setter([&field](const std::string&, const std::string& v) { field = v; });
    };
    auto num = [](double& field) {
        return Setter([&field](const std::string& k, const std::string& v) { field = to_double(k, v); });
    };
    auto count = [](std::size_t& field) {
        return Setter([&field](const std::string& k, const std::string& v) { field = to_u64(k, v); });
    };
    auto u64 = [](std::uint64_t& field) {
        return Setter([&field](const std::string& k, const std::string& v) { field = to_u64(k, v); });
    };
    auto& c = rc.campaign;
    auto& g = rc.evolve;
    std::map<std::string, Setter> setters{
        {"model", path(rc.model)},
        {"data_images", path(rc.data_images)},
        {"data_labels", path(rc.data_labels)},
        {"data_limit", count(rc.data_limit)},
        {"train_images", path(rc.train_images)},
        {"train_labels", path(rc.train_labels)},
        {"sample_size", count(rc.sample_size)},
        {"sample_seed", u64(rc.sample_seed)},
        {"n", count(c.n)},
        {"trials", count(c.trials)},
        {"seed", u64(c.seed)},
        {"time_offset", num(c.time_offset)},
        {"F_C", num(rc.params.F_C)},
        {"V_C", num(rc.params.V_C)},
        {"F_G", num(rc.params.F_G)},
        {"V_G", num(rc.params.V_G)},
        {"F_h", num(rc.params.F_h)},
        {"V_l", num(rc.params.V_l)},
        {"T_W", num(rc.params.T_W)},
        {"T_d", num(rc.params.T_d)},
        {"out_summary", out_path(rc.out_summary)},
        {"out_records", out_path(rc.out_records)},
        {"out_confusion", out_path(rc.out_confusion)},
        {"ga.population", count(g.ga.population)},
        {"ga.generations", count(g.ga.generations)},
        {"ga.mutation", num(g.ga.mutation)},
        {"ga.max_selections", count(g.ga.max_selections)},
        {"ga.seed", u64(g.ga.seed)},
        {"ga.fitness_trials", count(g.fitness_trials)},
        {"ga.fitness_inputs", count(g.fitness_inputs)},
        {"ga.eval_seed", u64(g.eval_seed)},
        {"ga.out_trace", out_path(g.out_trace)},
    };
    setters["profile"] = [&](const std::string&, const std::string& v) { rc.profile_name = v; };
    setters["source"] = [&](const std::string& k, const std::string& v) {
        try {
            c.source = parse_target_source(v);
        } catch (const std::invalid_argument&) {
            throw ConfigError(k + ": unknown target source '" + v + "'");
        }
    };
    setters["delivery"] = [&](const std::string& k, const std::string& v) {
        if (v == "device") {
            c.delivery = Delivery::Device;
        } else if (v == "precise") {
            c.delivery = Delivery::Precise;
        } else {
            throw ConfigError(k + ": expected device or precise, got '" + v + "'");
        }
    };
    setters["granularity"] = [&](const std::string& k, const std::string& v) {
        try {
            c.scheme = parse_scheme(v);
        } catch (const std::invalid_argument&) {
            throw ConfigError(k + ": unknown granularity '" + v + "'");
        }
    };
    setters["targeted"] = [&](const std::string& k, const std::string& v) { c.targeted = to_bool(k, v); };
    setters["target_class"] = [&](const std::string& k, const std::string& v) { c.target_class = to_u64(k, v); };
    setters["ga.target_fitness"] = [&](const std::string& k, const std::string& v) {
        g.ga.target_fitness = to_double(k, v);
    };
    setters["ga.t_w"] = [&](const std::string& k, const std::string& v) { g.rough_t_w = to_double(k, v); };

    std::map<std::string, std::string> overrides;
    std::ostringstream norm;
    for (const auto& [k, v] : kv) {
        norm << k << '=' << v << '\n';
        if (k.rfind("profile.", 0) == 0) {
            overrides.emplace(k.substr(8), v);
            continue;
        }
        const auto it = setters.find(k);
        if (it == setters.end()) {
            throw ConfigError(origin + ": unknown key '" + k + "'");
        }
        it->second(k, v);
    }
    rc.text = norm.str();

    for (const char* required : {"model", "data_images", "data_labels"}) {
        if (!kv.count(required)) {
            throw ConfigError(origin + ": missing required key '" + std::string(required) + "'");
        }
    }
    if (rc.profile_name == "default" || rc.profile_name == "ideal") {
        rc.profile = base_profile(rc.profile_name);
    } else {
        const std::filesystem::path p(rc.profile_name);
        rc.profile = load_profile(p.is_absolute() || base_dir.empty() ? p : base_dir / p);
    }
    for (const auto& [k, v] : overrides) {
        apply_profile_key(rc.profile, k, v, origin);
    }
    validate_profile(rc.profile, origin);

    if (c.n == 0) {
        throw ConfigError(origin + ": n must be at least 1");
    }
    if (c.trials == 0) {
        throw ConfigError(origin + ": trials must be at least 1");
    }
    if (c.target_class && !c.targeted) {
        throw ConfigError(origin + ": target_class needs targeted = true");
    }
    if (c.source == TargetSource::Independent && (rc.train_images.empty() || rc.train_labels.empty())) {
        throw ConfigError(origin + ": source indep needs train_images and train_labels");
    }
    if (rc.sample_size == 0) {
        throw ConfigError(origin + ": sample_size must be at least 1");
    }
    if (g.ga.population < 2 || g.ga.generations == 0 || g.fitness_trials == 0 || g.fitness_inputs == 0) {
        throw ConfigError(origin + ": ga.population >= 2 and positive ga.generations, ga.fitness_trials, "
                                   "ga.fitness_inputs required");
    }
    if (!(g.ga.mutation >= 0.0 && g.ga.mutation <= 1.0)) {
        throw ConfigError(origin + ": ga.mutation must lie in [0, 1]");
    }
    const auto& pr = rc.profile;
    if (rc.params.V_l < pr.v_min || rc.params.V_l > pr.v_max || rc.params.F_h < pr.f_min ||
        rc.params.F_h > pr.f_max) {
        throw ConfigError(origin + ": glitch point (V_l, F_h) lies outside the profile's legal ranges");
    }
    try {
        validate(rc.params, rc.profile);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return rc;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    return parse_run_config(read_text(path), path.string(), path.parent_path());
}

} // namespace lightning
