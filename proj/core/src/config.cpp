#include "c2f/config.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace c2f::cli {

namespace {

struct IniEntry {
    int line = 0;
    std::string key, value;
};

struct IniSection {
    int line = 0;
    std::string name;
    std::vector<IniEntry> entries;
};

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<IniSection> parse_ini(const std::string& text, std::vector<ParseError>& errors) {
    std::vector<IniSection> sections;
    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                errors.push_back({line_no, "unterminated section header"});
                continue;
            }
            IniSection sec;
            sec.line = line_no;
            sec.name = trim(line.substr(1, line.size() - 2));
            if (sec.name.empty()) {
                errors.push_back({line_no, "empty section name"});
                continue;
            }
            sections.push_back(std::move(sec));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back({line_no, "expected 'key = value' or '[section]'"});
            continue;
        }
        if (sections.empty()) {
            errors.push_back({line_no, "setting outside any section"});
            continue;
        }
        IniEntry e;
        e.line = line_no;
        e.key = trim(line.substr(0, eq));
        e.value = trim(line.substr(eq + 1));
        if (e.key.empty()) {
            errors.push_back({line_no, "empty key"});
            continue;
        }
        sections.back().entries.push_back(std::move(e));
    }
    return sections;
}

class ValueReader {
  public:
    explicit ValueReader(std::vector<ParseError>& errors) : errors_(errors) {}

    bool to_int(const IniEntry& e, int& out) {
        try {
            std::size_t pos = 0;
            const int v = std::stoi(e.value, &pos);
            if (pos != e.value.size()) throw std::invalid_argument("");
            out = v;
            return true;
        } catch (...) {
            fail(e, "expected an integer");
            return false;
        }
    }

    bool to_ll(const IniEntry& e, long long& out) {
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(e.value, &pos);
            if (pos != e.value.size()) throw std::invalid_argument("");
            out = v;
            return true;
        } catch (...) {
            fail(e, "expected an integer");
            return false;
        }
    }

    bool to_u64(const IniEntry& e, std::uint64_t& out) {
        try {
            std::size_t pos = 0;
            const std::uint64_t v = std::stoull(e.value, &pos);
            if (pos != e.value.size()) throw std::invalid_argument("");
            out = v;
            return true;
        } catch (...) {
            fail(e, "expected a non-negative integer");
            return false;
        }
    }

    bool to_double(const IniEntry& e, double& out) {
        try {
            std::size_t pos = 0;
            const double v = std::stod(e.value, &pos);
            if (pos != e.value.size()) throw std::invalid_argument("");
            out = v;
            return true;
        } catch (...) {
            fail(e, "expected a number");
            return false;
        }
    }

    bool to_bool(const IniEntry& e, bool& out) {
        if (e.value == "1" || e.value == "true" || e.value == "yes") {
            out = true;
            return true;
        }
        if (e.value == "0" || e.value == "false" || e.value == "no") {
            out = false;
            return true;
        }
        fail(e, "expected a boolean (true/false)");
        return false;
    }

    void fail(const IniEntry& e, const std::string& what) {
        errors_.push_back({e.line, "key '" + e.key + "': " + what});
    }

  private:
    std::vector<ParseError>& errors_;
};

}  // namespace

ConfigResult parse_config(const std::string& text) {
    ConfigResult result;
    auto& errors = result.errors;
    ValueReader read(errors);

    RunConfig cfg;
    cfg.schedule.baseline_epochs = 0;

    struct PhaseDraft {
        int line = 0;
        train::PhaseConfig phase;
        std::optional<double> budget_fraction;
        bool has_epochs = false;
    };
    std::vector<PhaseDraft> drafts;
    int stop_line = 0;
    std::string stop_kind = "fixed";
    std::optional<double> stop_target;
    long long stop_patience = 1;

    const auto sections = parse_ini(text, errors);
    for (const auto& sec : sections) {
        if (sec.name == "model") {
            for (const auto& e : sec.entries) {
                if (e.key == "embed_dim") read.to_int(e, cfg.model.embed_dim);
                else if (e.key == "num_layers") read.to_int(e, cfg.model.num_layers);
                else if (e.key == "num_heads") read.to_int(e, cfg.model.num_heads);
                else if (e.key == "mlp_ratio") read.to_int(e, cfg.model.mlp_ratio);
                else if (e.key == "num_classes") read.to_int(e, cfg.model.num_classes);
                else if (e.key == "dropout") read.to_double(e, cfg.model.dropout);
                else if (e.key == "patch_f") read.to_int(e, cfg.model.patch.height_bins);
                else if (e.key == "patch_t") read.to_int(e, cfg.model.patch.width_frames);
                else if (e.key == "task") {
                    if (e.value == "single_label")
                        cfg.model.task_kind = model::TaskKind::SingleLabel;
                    else if (e.value == "multi_label")
                        cfg.model.task_kind = model::TaskKind::MultiLabel;
                    else read.fail(e, "expected single_label or multi_label");
                } else read.fail(e, "unknown key in [model]");
            }
        } else if (sec.name == "data") {
            for (const auto& e : sec.entries) {
                if (e.key == "manifest") cfg.manifest_path = e.value;
                else if (e.key == "n_mels") read.to_int(e, cfg.framing.n_mels);
                else if (e.key == "target_frames") read.to_int(e, cfg.framing.target_time_frames);
                else if (e.key == "frame_size_ms") read.to_double(e, cfg.framing.frame_size_ms);
                else if (e.key == "frame_shift_ms") read.to_double(e, cfg.framing.frame_shift_ms);
                else if (e.key == "fft_size") read.to_int(e, cfg.framing.fft_size);
                else read.fail(e, "unknown key in [data]");
            }
        } else if (sec.name == "schedule") {
            for (const auto& e : sec.entries) {
                if (e.key == "baseline_epochs") read.to_ll(e, cfg.schedule.baseline_epochs);
                else if (e.key == "seed") read.to_u64(e, cfg.schedule.seed);
                else if (e.key == "batch_size") read.to_int(e, cfg.schedule.batch_size);
                else read.fail(e, "unknown key in [schedule]");
            }
        } else if (sec.name == "phase") {
            PhaseDraft draft;
            draft.line = sec.line;
            for (const auto& e : sec.entries) {
                if (e.key == "method") {
                    try {
                        draft.phase.method = compress::method_from_name(e.value);
                    } catch (const std::exception& ex) {
                        read.fail(e, ex.what());
                    }
                } else if (e.key == "C") {
                    read.to_int(e, draft.phase.factor);
                } else if (e.key == "epochs") {
                    if (read.to_ll(e, draft.phase.epochs)) draft.has_epochs = true;
                } else if (e.key == "budget_fraction") {
                    double f = 0;
                    if (read.to_double(e, f)) draft.budget_fraction = f;
                } else if (e.key == "lr") {
                    read.to_double(e, draft.phase.lr);
                } else if (e.key == "resize") {
                    if (e.value == "bilinear") draft.phase.resize = adapt::ResizeMethod::Bilinear;
                    else if (e.value == "pi") draft.phase.resize = adapt::ResizeMethod::PIResize;
                    else read.fail(e, "expected bilinear or pi");
                } else {
                    read.fail(e, "unknown key in [phase]");
                }
            }
            drafts.push_back(std::move(draft));
        } else if (sec.name == "stop") {
            stop_line = sec.line;
            for (const auto& e : sec.entries) {
                if (e.key == "kind") {
                    if (e.value == "fixed" || e.value == "surpass" || e.value == "convergence")
                        stop_kind = e.value;
                    else read.fail(e, "expected fixed, surpass or convergence");
                } else if (e.key == "target") {
                    double t = 0;
                    if (read.to_double(e, t)) stop_target = t;
                } else if (e.key == "patience") {
                    read.to_ll(e, stop_patience);
                } else {
                    read.fail(e, "unknown key in [stop]");
                }
            }
        } else {
            errors.push_back({sec.line, "unknown section [" + sec.name + "]"});
        }
    }

    if (!errors.empty()) return result;

    // Semantic validation, each failure pinned to its section line.
    if (cfg.schedule.baseline_epochs < 1)
        errors.push_back({0, "[schedule] baseline_epochs must be >= 1"});
    if (cfg.schedule.batch_size < 1) errors.push_back({0, "[schedule] batch_size must be >= 1"});
    if (drafts.empty()) errors.push_back({0, "configuration declares no [phase] sections"});

    try {
        cfg.model.validate();
    } catch (const std::exception& ex) {
        errors.push_back({0, std::string("[model] ") + ex.what()});
    }

    if (stop_kind == "fixed") {
        cfg.schedule.stop.kind = train::StopCriterion::Kind::FixedEpochs;
    } else if (stop_kind == "surpass") {
        cfg.schedule.stop.kind = train::StopCriterion::Kind::SurpassBaseline;
        if (!stop_target)
            errors.push_back({stop_line, "[stop] kind=surpass requires target"});
        else
            cfg.schedule.stop.target_metric = *stop_target;
    } else {
        cfg.schedule.stop.kind = train::StopCriterion::Kind::Convergence;
        if (stop_patience < 1)
            errors.push_back({stop_line, "[stop] patience must be >= 1"});
        cfg.schedule.stop.patience = stop_patience;
    }

    int prev_factor = 0;
    for (std::size_t i = 0; i < drafts.size(); ++i) {
        auto& d = drafts[i];
        auto& ph = d.phase;
        const std::string where = "phase " + std::to_string(i);

        if (d.has_epochs && d.budget_fraction)
            errors.push_back({d.line, where + ": give epochs or budget_fraction, not both"});
        if (d.budget_fraction) {
            if (*d.budget_fraction <= 0.0 || *d.budget_fraction > 1.0)
                errors.push_back({d.line, where + ": budget_fraction must be in (0, 1]"});
            else
                ph.epochs = std::llround(*d.budget_fraction * cfg.schedule.baseline_epochs);
        } else if (!d.has_epochs) {
            errors.push_back({d.line, where + ": epochs (or budget_fraction) is required"});
        }
        if (ph.epochs < 0) errors.push_back({d.line, where + ": epochs must be >= 0"});
        if (ph.lr <= 0.0) errors.push_back({d.line, where + ": lr must be positive"});
        if (ph.factor < 1) errors.push_back({d.line, where + ": C must be >= 1"});
        if (i > 0 && ph.factor > prev_factor)
            errors.push_back(
                {d.line, where + ": compression factors must be non-increasing across phases"});
        prev_factor = ph.factor;

        if (ph.method == compress::Method::None && ph.factor != 1)
            errors.push_back({d.line, where + ": method 'none' requires C=1"});

        // Geometry divisibility against the declared framing.
        const int T = cfg.framing.target_time_frames;
        const int F = cfg.framing.n_mels;
        if (F % cfg.model.patch.height_bins != 0)
            errors.push_back({d.line, where + ": n_mels " + std::to_string(F) +
                                          " not divisible by patch_f"});
        if (compress::shrinks_spectrogram(ph.method)) {
            if (T % ph.factor != 0)
                errors.push_back({d.line, where + ": target_frames " + std::to_string(T) +
                                              " not divisible by C=" +
                                              std::to_string(ph.factor)});
            else if ((T / ph.factor) % cfg.model.patch.width_frames != 0)
                errors.push_back({d.line, where + ": compressed length " +
                                              std::to_string(T / ph.factor) +
                                              " not divisible by patch_t"});
        } else {
            const int wide = cfg.model.patch.width_frames * ph.factor;
            if (T % wide != 0)
                errors.push_back({d.line, where + ": target_frames " + std::to_string(T) +
                                              " not divisible by patch width " +
                                              std::to_string(wide)});
        }
    }
    if (!drafts.empty() && drafts.back().phase.factor != 1)
        errors.push_back({drafts.back().line, "final phase must have C=1"});

    if (!errors.empty()) return result;

    for (auto& d : drafts) cfg.schedule.phases.push_back(d.phase);
    try {
        cfg.schedule.validate();
    } catch (const std::exception& ex) {
        errors.push_back({0, ex.what()});
        return result;
    }
    result.config = std::move(cfg);
    return result;
}

SpecResult parse_synthetic_spec(const std::string& text) {
    SpecResult result;
    auto& errors = result.errors;
    ValueReader read(errors);

    data::SyntheticSpec spec;
    spec.classes.clear();
    spec.framing.target_time_frames = 128;  // desk-scale default for 1.3 s clips

    const auto sections = parse_ini(text, errors);
    for (const auto& sec : sections) {
        if (sec.name == "corpus") {
            for (const auto& e : sec.entries) {
                if (e.key == "sample_rate") read.to_int(e, spec.sample_rate_hz);
                else if (e.key == "duration_s") read.to_double(e, spec.duration_s);
                else if (e.key == "samples_per_class") read.to_int(e, spec.samples_per_class);
                else if (e.key == "snr_db") read.to_double(e, spec.snr_db);
                else if (e.key == "multi_label") read.to_bool(e, spec.multi_label);
                else if (e.key == "n_mels") read.to_int(e, spec.framing.n_mels);
                else if (e.key == "target_frames")
                    read.to_int(e, spec.framing.target_time_frames);
                else if (e.key == "frame_size_ms") read.to_double(e, spec.framing.frame_size_ms);
                else if (e.key == "frame_shift_ms")
                    read.to_double(e, spec.framing.frame_shift_ms);
                else if (e.key == "fft_size") read.to_int(e, spec.framing.fft_size);
                else read.fail(e, "unknown key in [corpus]");
            }
        } else if (sec.name == "class") {
            data::ClassSpec cls;
            bool have_kind = false;
            for (const auto& e : sec.entries) {
                if (e.key == "kind") {
                    have_kind = true;
                    if (e.value == "tone") cls.kind = data::ClassSpec::Kind::Tone;
                    else if (e.value == "chirp") cls.kind = data::ClassSpec::Kind::Chirp;
                    else if (e.value == "am_noise") cls.kind = data::ClassSpec::Kind::AmNoise;
                    else if (e.value == "harmonic") cls.kind = data::ClassSpec::Kind::Harmonic;
                    else {
                        have_kind = false;
                        read.fail(e, "expected tone, chirp, am_noise or harmonic");
                    }
                } else if (e.key == "freq" || e.key == "f0") {
                    double v = 0;
                    if (read.to_double(e, v)) {
                        cls.freq = v;
                        cls.f0 = v;
                    }
                } else if (e.key == "f1") {
                    read.to_double(e, cls.f1);
                } else if (e.key == "rate") {
                    read.to_double(e, cls.rate);
                } else {
                    read.fail(e, "unknown key in [class]");
                }
            }
            if (!have_kind) errors.push_back({sec.line, "[class] requires kind"});
            spec.classes.push_back(cls);
        } else {
            errors.push_back({sec.line, "unknown section [" + sec.name + "]"});
        }
    }

    if (!errors.empty()) return result;
    if (spec.classes.size() < 2) errors.push_back({0, "need at least 2 [class] sections"});
    if (spec.samples_per_class < 1) errors.push_back({0, "samples_per_class must be >= 1"});
    if (spec.duration_s <= 0.0) errors.push_back({0, "duration_s must be positive"});
    if (spec.snr_db < -40.0 || spec.snr_db > 120.0)
        errors.push_back({0, "snr_db out of supported range [-40, 120]"});

    if (!errors.empty()) return result;
    result.spec = std::move(spec);
    return result;
}

}  // namespace c2f::cli
