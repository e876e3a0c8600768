#include "c2f/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace c2f::data {

namespace fs = std::filesystem;

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

void put_u16(std::ostream& os, std::uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    os.write(b, 2);
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Derives an independent per-file stream so corpus generation stays
// deterministic regardless of generation order.
std::uint64_t file_seed(std::uint64_t corpus_seed, std::uint64_t index) {
    std::uint64_t z = corpus_seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

SyntheticSpec default_synthetic_spec() {
    // The chirp sweeps through the tone's frequency, so separating them
    // rewards temporal integration; the two AM-noise classes differ only in
    // envelope rate. Both choices keep fine time structure label-relevant.
    SyntheticSpec spec;
    spec.classes = {{ClassSpec::Kind::Tone, 880.0, 0, 0, 0},
                    {ClassSpec::Kind::Chirp, 0, 500.0, 1200.0, 0},
                    {ClassSpec::Kind::AmNoise, 0, 0, 0, 7.0},
                    {ClassSpec::Kind::AmNoise, 0, 0, 0, 28.0}};
    spec.samples_per_class = 50;
    spec.duration_s = 1.3;
    spec.snr_db = 13.0;
    spec.multi_label = false;
    spec.sample_rate_hz = 16000;
    spec.framing.target_time_frames = 128;
    return spec;
}

dsp::Waveform read_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open WAV file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw std::runtime_error("malformed WAV header (missing RIFF/WAVE): " + path);

    int sample_rate = 0;
    bool have_fmt = false;
    const unsigned char* data_ptr = nullptr;
    std::size_t data_len = 0;

    std::size_t off = 12;
    while (off + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + off);
        const std::uint32_t len = get_u32(bytes.data() + off + 4);
        const std::size_t body = off + 8;
        if (body + len > bytes.size())
            throw std::runtime_error("malformed WAV: chunk overruns file: " + path);
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (len < 16) throw std::runtime_error("malformed WAV fmt chunk: " + path);
            const std::uint16_t format = get_u16(bytes.data() + body);
            const std::uint16_t channels = get_u16(bytes.data() + body + 2);
            sample_rate = static_cast<int>(get_u32(bytes.data() + body + 4));
            const std::uint16_t bits = get_u16(bytes.data() + body + 14);
            if (format != 1)
                throw std::runtime_error("unsupported WAV encoding (want PCM): " + path);
            if (channels != 1)
                throw std::runtime_error("unsupported WAV channel count (want mono): " + path);
            if (bits != 16)
                throw std::runtime_error("unsupported WAV bit depth (want 16): " + path);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_ptr = bytes.data() + body;
            data_len = len;
        }
        off = body + len + (len % 2);  // chunks are word-aligned
    }
    if (!have_fmt) throw std::runtime_error("malformed WAV: no fmt chunk: " + path);
    if (data_ptr == nullptr) throw std::runtime_error("malformed WAV: no data chunk: " + path);
    if (data_len == 0 || data_len % 2 != 0)
        throw std::runtime_error("malformed WAV: empty or odd-sized payload: " + path);

    dsp::Waveform w;
    w.sample_rate_hz = sample_rate;
    w.samples.resize(data_len / 2);
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const std::int16_t s =
            static_cast<std::int16_t>(get_u16(data_ptr + 2 * i));
        w.samples[i] = static_cast<double>(s) / 32767.0;
    }
    return w;
}

void write_wav(const std::string& path, const dsp::Waveform& w) {
    if (w.samples.empty()) throw std::invalid_argument("refusing to write empty waveform");
    if (w.sample_rate_hz <= 0) throw std::invalid_argument("sample rate must be positive");
    for (double s : w.samples)
        if (!(s >= -1.0 && s <= 1.0))
            throw std::invalid_argument("waveform amplitude outside [-1, 1]");

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open WAV for writing: " + path);

    const std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * 2);
    os.write("RIFF", 4);
    put_u32(os, 36 + data_len);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    put_u32(os, 16);
    put_u16(os, 1);  // PCM
    put_u16(os, 1);  // mono
    put_u32(os, static_cast<std::uint32_t>(w.sample_rate_hz));
    put_u32(os, static_cast<std::uint32_t>(w.sample_rate_hz) * 2);  // byte rate
    put_u16(os, 2);   // block align
    put_u16(os, 16);  // bits per sample
    os.write("data", 4);
    put_u32(os, data_len);
    for (double s : w.samples) {
        const auto q = static_cast<std::int16_t>(std::lround(s * 32767.0));
        put_u16(os, static_cast<std::uint16_t>(q));
    }
    if (!os) throw std::runtime_error("failed writing WAV: " + path);
}

dsp::Waveform synthesize_clip(const ClassSpec& cls, double duration_s, int sample_rate_hz,
                              std::mt19937_64& rng) {
    if (duration_s <= 0) throw std::invalid_argument("duration must be positive");
    const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
    dsp::Waveform w;
    w.sample_rate_hz = sample_rate_hz;
    w.samples.assign(n, 0.0);

    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double dt = 1.0 / sample_rate_hz;

    switch (cls.kind) {
        case ClassSpec::Kind::Tone: {
            const double phi = phase_dist(rng);
            for (std::size_t i = 0; i < n; ++i)
                w.samples[i] = std::sin(2.0 * std::numbers::pi * cls.freq * i * dt + phi);
            break;
        }
        case ClassSpec::Kind::Chirp: {
            const double phi = phase_dist(rng);
            const double slope = (cls.f1 - cls.f0) / duration_s;
            for (std::size_t i = 0; i < n; ++i) {
                const double t = i * dt;
                w.samples[i] = std::sin(
                    2.0 * std::numbers::pi * (cls.f0 * t + 0.5 * slope * t * t) + phi);
            }
            break;
        }
        case ClassSpec::Kind::AmNoise: {
            const double phi = phase_dist(rng);
            for (std::size_t i = 0; i < n; ++i) {
                const double env =
                    0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * cls.rate * i * dt + phi);
                w.samples[i] = gauss(rng) * env;
            }
            break;
        }
        case ClassSpec::Kind::Harmonic: {
            const double nyquist = 0.45 * sample_rate_hz;
            for (int k = 1; k <= 6; ++k) {
                const double fk = cls.freq * k;
                if (fk >= nyquist) break;
                const double phi = phase_dist(rng);
                const double amp = 1.0 / k;
                for (std::size_t i = 0; i < n; ++i)
                    w.samples[i] += amp * std::sin(2.0 * std::numbers::pi * fk * i * dt + phi);
            }
            break;
        }
    }
    return w;
}

dsp::Waveform render_sample(const SyntheticSpec& spec, const std::vector<int>& labels,
                            std::mt19937_64& rng) {
    if (labels.empty()) throw std::invalid_argument("sample needs at least one label");
    const auto n =
        static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate_hz));

    dsp::Waveform mix;
    mix.sample_rate_hz = spec.sample_rate_hz;
    mix.samples.assign(n, 0.0);
    for (int label : labels) {
        if (label < 0 || label >= static_cast<int>(spec.classes.size()))
            throw std::invalid_argument("label out of range");
        dsp::Waveform part =
            synthesize_clip(spec.classes[label], spec.duration_s, spec.sample_rate_hz, rng);
        for (std::size_t i = 0; i < n; ++i) mix.samples[i] += part.samples[i] / labels.size();
    }

    double sig_power = 0.0;
    for (double s : mix.samples) sig_power += s * s;
    sig_power /= static_cast<double>(n);
    const double noise_power = sig_power / std::pow(10.0, spec.snr_db / 10.0);
    const double sigma = std::sqrt(noise_power);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& s : mix.samples) s += sigma * gauss(rng);

    double peak = 0.0;
    for (double s : mix.samples) peak = std::max(peak, std::abs(s));
    if (peak > 0.99) {
        const double scale = 0.99 / peak;
        for (auto& s : mix.samples) s *= scale;
    }
    return mix;
}

Manifest generate_corpus(const SyntheticSpec& spec, std::uint64_t seed,
                         const std::string& out_dir) {
    if (spec.classes.size() < 2) throw std::invalid_argument("need at least 2 classes");
    if (spec.samples_per_class < 1)
        throw std::invalid_argument("samples_per_class must be positive");
    if (spec.duration_s <= 0) throw std::invalid_argument("duration must be positive");
    const int k = static_cast<int>(spec.classes.size());

    fs::create_directories(out_dir);

    Manifest m;
    m.seed = seed;
    m.num_classes = k;
    m.multi_label = spec.multi_label;
    m.sample_rate_hz = spec.sample_rate_hz;
    m.duration_s = spec.duration_s;
    m.framing = spec.framing;

    const int total = k * spec.samples_per_class;
    std::mt19937_64 label_rng(file_seed(seed, 0));

    std::vector<ManifestRecord> records;
    records.reserve(total);
    if (spec.multi_label) {
        std::uniform_int_distribution<int> cls_dist(0, k - 1);
        for (int i = 0; i < total; ++i) {
            int a = cls_dist(label_rng);
            int b = cls_dist(label_rng);
            while (b == a) b = cls_dist(label_rng);
            if (a > b) std::swap(a, b);
            char name[32];
            std::snprintf(name, sizeof(name), "mix_%04d.wav", i);
            records.push_back({name, {a, b}, false});
        }
    } else {
        for (int c = 0; c < k; ++c) {
            for (int i = 0; i < spec.samples_per_class; ++i) {
                char name[32];
                std::snprintf(name, sizeof(name), "c%d_s%04d.wav", c, i);
                records.push_back({name, {c}, false});
            }
        }
    }

    // 80/20 split, stratified by first label, seeded shuffle within groups.
    std::mt19937_64 split_rng(file_seed(seed, 1));
    std::vector<std::vector<int>> groups(spec.multi_label ? 1 : k);
    for (int i = 0; i < total; ++i)
        groups[spec.multi_label ? 0 : records[i].labels[0]].push_back(i);
    for (auto& g : groups) {
        std::shuffle(g.begin(), g.end(), split_rng);
        std::size_t n_eval = g.size() / 5;
        if (n_eval == 0 && g.size() >= 2) n_eval = 1;
        for (std::size_t j = 0; j < n_eval; ++j) records[g[j]].is_eval = true;
    }

    // Render and write every clip (independent per-file streams).
    for (int i = 0; i < total; ++i) {
        std::mt19937_64 rng(file_seed(seed, 2 + static_cast<std::uint64_t>(i)));
        dsp::Waveform w = render_sample(spec, records[i].labels, rng);
        write_wav((fs::path(out_dir) / records[i].relative_path).string(), w);
    }

    // Mel statistics over the training split at full resolution.
    double sum = 0.0, sumsq = 0.0;
    std::size_t count = 0;
    for (int i = 0; i < total; ++i) {
        if (records[i].is_eval) continue;
        dsp::Waveform w = read_wav((fs::path(out_dir) / records[i].relative_path).string());
        dsp::MelSpectrogram mel = dsp::log_mel(w, spec.framing);
        for (double v : mel.bins.data) {
            sum += v;
            sumsq += v * v;
        }
        count += mel.bins.data.size();
    }
    if (count == 0) throw std::runtime_error("training split is empty");
    m.mel_mean = sum / static_cast<double>(count);
    const double var = sumsq / static_cast<double>(count) - m.mel_mean * m.mel_mean;
    m.mel_std = std::sqrt(std::max(var, 1e-12));
    m.records = std::move(records);

    write_manifest((fs::path(out_dir) / "manifest.tsv").string(), m);
    return m;
}

void write_manifest(const std::string& path, const Manifest& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open manifest for writing: " + path);
    os << "# c2f-manifest v1"
       << "\tseed=" << m.seed << "\tnum_classes=" << m.num_classes
       << "\tmulti_label=" << (m.multi_label ? 1 : 0)
       << "\tsample_rate=" << m.sample_rate_hz << "\tduration_s=" << fmt_double(m.duration_s)
       << "\tframe_size_ms=" << fmt_double(m.framing.frame_size_ms)
       << "\tframe_shift_ms=" << fmt_double(m.framing.frame_shift_ms)
       << "\tn_mels=" << m.framing.n_mels << "\tfft_size=" << m.framing.fft_size
       << "\ttarget_time_frames=" << m.framing.target_time_frames
       << "\tmel_mean=" << fmt_double(m.mel_mean) << "\tmel_std=" << fmt_double(m.mel_std)
       << "\n";
    for (const auto& r : m.records) {
        os << r.relative_path << "\t";
        for (std::size_t i = 0; i < r.labels.size(); ++i) {
            if (i) os << ",";
            os << r.labels[i];
        }
        os << "\t" << (r.is_eval ? "eval" : "train") << "\n";
    }
    if (!os) throw std::runtime_error("failed writing manifest: " + path);
}

Manifest read_manifest(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open manifest: " + path);
    std::string line;
    if (!std::getline(is, line) || line.rfind("# c2f-manifest v1", 0) != 0)
        throw std::runtime_error("not a manifest file: " + path);

    Manifest m;
    std::stringstream header(line);
    std::string field;
    std::getline(header, field, '\t');  // tag
    while (std::getline(header, field, '\t')) {
        const auto eq = field.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("malformed manifest header field '" + field + "'");
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        try {
            if (key == "seed") m.seed = std::stoull(value);
            else if (key == "num_classes") m.num_classes = std::stoi(value);
            else if (key == "multi_label") m.multi_label = std::stoi(value) != 0;
            else if (key == "sample_rate") m.sample_rate_hz = std::stoi(value);
            else if (key == "duration_s") m.duration_s = std::stod(value);
            else if (key == "frame_size_ms") m.framing.frame_size_ms = std::stod(value);
            else if (key == "frame_shift_ms") m.framing.frame_shift_ms = std::stod(value);
            else if (key == "n_mels") m.framing.n_mels = std::stoi(value);
            else if (key == "fft_size") m.framing.fft_size = std::stoi(value);
            else if (key == "target_time_frames") m.framing.target_time_frames = std::stoi(value);
            else if (key == "mel_mean") m.mel_mean = std::stod(value);
            else if (key == "mel_std") m.mel_std = std::stod(value);
            else throw std::runtime_error("unknown manifest header key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("malformed manifest header value for '" + key + "'");
        }
    }

    std::set<std::string> seen;
    bool any_train = false, any_eval = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        ManifestRecord r;
        std::string labels, split;
        if (!std::getline(ss, r.relative_path, '\t') || !std::getline(ss, labels, '\t') ||
            !std::getline(ss, split, '\t'))
            throw std::runtime_error("malformed manifest record: " + line);
        std::stringstream ls(labels);
        std::string tokstr;
        while (std::getline(ls, tokstr, ',')) {
            const int label = std::stoi(tokstr);
            if (label < 0 || label >= m.num_classes)
                throw std::runtime_error("manifest label out of range: " + line);
            r.labels.push_back(label);
        }
        if (r.labels.empty()) throw std::runtime_error("manifest record has no labels: " + line);
        if (split == "eval") r.is_eval = true;
        else if (split == "train") r.is_eval = false;
        else throw std::runtime_error("manifest split must be train or eval: " + line);
        if (!seen.insert(r.relative_path).second)
            throw std::runtime_error("duplicate manifest path: " + r.relative_path);
        (r.is_eval ? any_eval : any_train) = true;
        m.records.push_back(std::move(r));
    }
    if (!any_train || !any_eval)
        throw std::runtime_error("manifest must contain both train and eval records");
    return m;
}

}  // namespace c2f::data
