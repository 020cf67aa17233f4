#include "lightning/report.hpp"

#include "lightning/hash.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#ifndef LIGHTNING_VERSION
#define LIGHTNING_VERSION "0.0.0"
#endif

namespace lightning {

namespace {

using nlohmann::json;

std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json target_json(const CandidateTarget& t)
{
    json j = {{"layer", t.addr.layer}, {"index", t.addr.index}, {"granularity", to_string(t.granularity)}};
    if (t.anchor) {
        j["anchor_bit"] = t.anchor->index();
    }
    return j;
}

CandidateTarget target_from(const json& j)
{
    CandidateTarget t;
    t.addr = {j.at("layer").get<std::uint32_t>(), j.at("index").get<std::uint32_t>()};
    t.granularity = parse_granularity(j.at("granularity").get<std::string>());
    if (j.contains("anchor_bit")) {
        t.anchor = BitLoc(j.at("anchor_bit").get<unsigned>());
    }
    return t;
}

GlitchKind parse_kind(const std::string& s)
{
    for (auto k : {GlitchKind::NoEffect, GlitchKind::Faults, GlitchKind::Crash, GlitchKind::NoResponse}) {
        if (s == to_string(k)) {
            return k;
        }
    }
    throw std::runtime_error("unknown glitch kind '" + s + "'");
}

TrialStatus parse_status(const std::string& s)
{
    for (auto t : {TrialStatus::Completed, TrialStatus::DeviceCrash, TrialStatus::DeviceNoResponse}) {
        if (s == to_string(t)) {
            return t;
        }
    }
    throw std::runtime_error("unknown trial status '" + s + "'");
}

} // namespace

std::string_view tool_version()
{
    return LIGHTNING_VERSION;
}

std::uint64_t config_hash(std::string_view text)
{
    return fnv1a(text);
}

std::string provenance_comment(const Provenance& p)
{
    return "# lightning-sim " + std::string(tool_version()) + " command=" + p.command +
           " seed=" + std::to_string(p.seed) + " config_hash=" + hex64(p.config_hash) + "\n";
}

std::string summary_csv(const Provenance& p, const CampaignReport& r)
{
    std::ostringstream ss;
    ss << provenance_comment(p) << "metric,value\n";
    const std::pair<const char*, std::size_t> counts[] = {
        {"classes", r.classes},      {"trials", r.trials},
        {"completed", r.completed},  {"crashed", r.crashed},
        {"no_response", r.no_response}, {"no_class", r.no_class},
        {"flips", r.flips},          {"targeted_eligible", r.targeted_eligible},
        {"targeted_success", r.targeted_success},
    };
    for (const auto& [k, v] : counts) {
        ss << k << ',' << v << '\n';
    }
    const std::pair<const char*, double> rates[] = {
        {"baseline_accuracy", r.baseline_accuracy()},
        {"attacked_accuracy", r.attacked_accuracy()},
        {"effective_accuracy", r.effective_accuracy()},
        {"degradation_points", r.degradation()},
        {"effective_degradation_points", r.effective_degradation()},
        {"crash_rate", r.crash_rate()},
        {"no_response_rate", r.no_response_rate()},
        {"targeted_success_rate", r.targeted_success_rate()},
        {"mean_pair_success", r.mean_pair_success()},
    };
    for (const auto& [k, v] : rates) {
        ss << k << ',' << num(v) << '\n';
    }
    return ss.str();
}

std::string confusion_csv(const Provenance& p, const CampaignReport& r)
{
    const std::size_t C = r.classes;
    std::ostringstream ss;
    ss << provenance_comment(p) << "true";
    for (std::size_t c = 0; c < C; ++c) {
        ss << ",pred_" << c;
    }
    ss << '\n';
    for (std::size_t t = 0; t < C; ++t) {
        ss << t;
        for (std::size_t c = 0; c < C; ++c) {
            ss << ',' << r.confusion[t * C + c];
        }
        ss << '\n';
    }
    return ss.str();
}

std::string records_jsonl(const Provenance& p, const std::vector<TrialResult>& records, std::size_t classes)
{
    std::string out;
    json head = {{"provenance",
                  {{"tool", "lightning-sim"},
                   {"version", tool_version()},
                   {"command", p.command},
                   {"seed", p.seed},
                   {"config_hash", hex64(p.config_hash)},
                   {"classes", classes}}}};
    out += head.dump() + "\n";
    for (const auto& r : records) {
        json attempts = json::array();
        for (const auto& a : r.attempts) {
            json targets = json::array();
            for (const auto& t : a.targets) {
                targets.push_back(target_json(t));
            }
            json positions = json::array();
            for (const auto& inj : a.outcome.positions) {
                positions.push_back({inj.addr.layer, inj.addr.index, inj.loc.index()});
            }
            attempts.push_back({{"T_W", a.T_W},
                                {"duration", a.duration},
                                {"targets", targets},
                                {"outcome", to_string(a.outcome.kind)},
                                {"positions", positions}});
        }
        json j = {{"input_id", r.input_id},
                  {"true_label", r.true_label},
                  {"mode", r.mode.targeted ? "targeted" : "non-targeted"},
                  {"status", to_string(r.status)},
                  {"baseline_class", r.baseline_class},
                  {"final_class", r.final_class},
                  {"flips_applied", r.flips_applied},
                  {"attempts", attempts}};
        if (r.mode.targeted) {
            j["target_class"] = r.mode.target_class;
        }
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<TrialResult> parse_records_jsonl(std::string_view text, std::size_t& classes, Provenance& provenance)
{
    std::vector<TrialResult> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    bool have_head = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            const json j = json::parse(line);
            if (!have_head) {
                const auto& h = j.at("provenance");
                provenance.command = h.at("command").get<std::string>();
                provenance.seed = h.at("seed").get<std::uint64_t>();
                provenance.config_hash = std::stoull(h.at("config_hash").get<std::string>(), nullptr, 16);
                classes = h.at("classes").get<std::size_t>();
                have_head = true;
                continue;
            }
            TrialResult r;
            r.input_id = j.at("input_id").get<std::size_t>();
            r.true_label = j.at("true_label").get<std::size_t>();
            const auto mode = j.at("mode").get<std::string>();
            if (mode == "targeted") {
                r.mode = AttackMode::toward(j.at("target_class").get<std::size_t>());
            } else if (mode != "non-targeted") {
                throw std::runtime_error("unknown mode '" + mode + "'");
            }
            r.status = parse_status(j.at("status").get<std::string>());
            r.baseline_class = j.at("baseline_class").get<std::size_t>();
            r.final_class = j.at("final_class").get<std::size_t>();
            r.flips_applied = j.at("flips_applied").get<std::size_t>();
            for (const auto& a : j.at("attempts")) {
                InjectionAttempt att;
                att.T_W = a.at("T_W").get<double>();
                att.duration = a.at("duration").get<double>();
                for (const auto& t : a.at("targets")) {
                    att.targets.push_back(target_from(t));
                }
                att.outcome.kind = parse_kind(a.at("outcome").get<std::string>());
                for (const auto& pos : a.at("positions")) {
                    att.outcome.positions.push_back(
                        {{pos.at(0).get<std::uint32_t>(), pos.at(1).get<std::uint32_t>()},
                         BitLoc(pos.at(2).get<unsigned>())});
                }
                r.attempts.push_back(std::move(att));
            }
            if (r.true_label >= classes || r.baseline_class >= classes || r.final_class > classes) {
                throw std::runtime_error("class index outside the recorded class count");
            }
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw std::runtime_error("records line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_head) {
        throw std::runtime_error("records file has no provenance line");
    }
    return out;
}

std::string sensitivity_csv(const Provenance& p, const std::vector<SensitivityEntry>& entries)
{
    std::ostringstream ss;
    ss << provenance_comment(p) << "rank,layer,element,granularity,anchor_bit,S\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& t = entries[i].target;
        ss << i << ',' << t.addr.layer << ',' << t.addr.index << ',' << to_string(t.granularity) << ','
           << (t.anchor ? std::to_string(t.anchor->index()) : "") << ',' << num(entries[i].s) << '\n';
    }
    return ss.str();
}

std::string calibration_csv(const Provenance& p, const std::vector<CalibrationCell>& cells)
{
    std::ostringstream ss;
    ss << provenance_comment(p)
       << "V_l,F_h,stress,trials,rate_no_effect,rate_fault,rate_crash,rate_noresp,rate_single_bit,mean_bits\n";
    for (const auto& c : cells) {
        ss << num(c.v_l) << ',' << num(c.f_h) << ',' << num(c.stress) << ',' << c.trials << ','
           << num(c.rate(c.no_effect)) << ',' << num(c.rate(c.faults)) << ',' << num(c.rate(c.crash)) << ','
           << num(c.rate(c.noresp)) << ',' << num(c.rate(c.single_bit)) << ',' << num(c.mean_bits()) << '\n';
    }
    return ss.str();
}

std::string trace_csv(const Provenance& p, const GaResult& result)
{
    std::ostringstream ss;
    ss << provenance_comment(p) << "generation,best_fitness,generation_best,mean_fitness,F_h,V_l,T_W,T_d\n";
    for (const auto& g : result.trace) {
        ss << g.generation << ',' << num(g.best) << ',' << num(g.generation_best) << ',' << num(g.mean);
        for (double v : g.best_seed.genes) {
            ss << ',' << num(v);
        }
        ss << '\n';
    }
    return ss.str();
}

std::string summary_text(const CampaignReport& r)
{
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2);
    ss << "trials              " << r.trials << " (completed " << r.completed << ", crashed " << r.crashed
       << ", no response " << r.no_response << ")\n";
    ss << "baseline accuracy   " << 100.0 * r.baseline_accuracy() << " %\n";
    ss << "attacked accuracy   " << 100.0 * r.attacked_accuracy() << " %\n";
    ss << "degradation         " << r.degradation() << " points\n";
    ss << "effective           " << r.effective_degradation() << " points (failed runs counted as clean)\n";
    if (r.targeted_eligible) {
        ss << "targeted success    " << 100.0 * r.targeted_success_rate() << " % (" << r.targeted_success << "/"
           << r.targeted_eligible << "), pair mean " << 100.0 * r.mean_pair_success() << " %\n";
    }
    return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw std::runtime_error("write failed for " + path.string());
    }
}

std::string read_text_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace lightning
