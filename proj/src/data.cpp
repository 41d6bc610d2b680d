#include "jfr/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "jfr/io.hpp"

namespace jfr {

// ---- pixel normalization ----------------------------------------------------

double normalize_pixel(double raw) { return (raw - 127.5) / 128.0; }
double denormalize_pixel(double value) { return value * 128.0 + 127.5; }

Tensor normalize_image(const Tensor& raw) {
    Tensor out = raw;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = normalize_pixel(out[i]);
    return out;
}

Tensor denormalize_image(const Tensor& value) {
    Tensor out = value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = denormalize_pixel(out[i]);
    return out;
}

// ---- resampling ---------------------------------------------------------------

namespace {

/// Catmull-Rom kernel (bicubic with a = -0.5), support (-2, 2).
double cubic_weight(double t) {
    t = std::abs(t);
    if (t <= 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
    if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
    return 0.0;
}

/// Resizes the middle axis of a [C, N, M] view from `in_n` to `out_n`,
/// treating M as the fastest axis. Used twice: once per spatial axis.
Tensor resize_axis(const Tensor& img, std::size_t out_n) {
    const std::size_t c = img.dim(0), in_n = img.dim(1), m = img.dim(2);
    Tensor out({c, out_n, m});
    const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
    for (std::size_t on = 0; on < out_n; ++on) {
        const double src = (static_cast<double>(on) + 0.5) * scale - 0.5;
        const double base = std::floor(src);
        double w[4];
        std::size_t idx[4];
        for (int k = 0; k < 4; ++k) {
            const double pos = base + static_cast<double>(k - 1);
            w[k] = cubic_weight(src - pos);
            const double clamped = std::clamp(pos, 0.0, static_cast<double>(in_n - 1));
            idx[k] = static_cast<std::size_t>(clamped);
        }
        for (std::size_t ic = 0; ic < c; ++ic) {
            for (std::size_t im = 0; im < m; ++im) {
                double acc = 0.0;
                for (int k = 0; k < 4; ++k) acc += w[k] * img(ic, idx[k], im);
                out(ic, on, im) = acc;
            }
        }
    }
    return out;
}

/// Swaps the last two axes of a [C, A, B] tensor.
Tensor transpose_hw(const Tensor& img) {
    const std::size_t c = img.dim(0), a = img.dim(1), b = img.dim(2);
    Tensor out({c, b, a});
    for (std::size_t ic = 0; ic < c; ++ic)
        for (std::size_t ia = 0; ia < a; ++ia)
            for (std::size_t ib = 0; ib < b; ++ib) out(ic, ib, ia) = img(ic, ia, ib);
    return out;
}

}  // namespace

Tensor bicubic_resize(const Tensor& img, std::size_t out_h, std::size_t out_w) {
    if (img.rank() != 3)
        throw std::invalid_argument("bicubic_resize: expected [C,H,W], got " + shape_str(img));
    if (out_h == 0 || out_w == 0)
        throw std::invalid_argument("bicubic_resize: output dims must be positive");
    // H pass, then W pass (via transposes so the kernel loop is one routine)
    Tensor rows = resize_axis(img, out_h);
    return transpose_hw(resize_axis(transpose_hw(rows), out_w));
}

Tensor hflip(const Tensor& img) {
    if (img.rank() < 1) throw std::invalid_argument("hflip: rank-0 tensor");
    const std::size_t w = img.dim(img.rank() - 1);
    Tensor out(img.shape());
    const std::size_t rows = img.size() / w;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = img.data() + r * w;
        double* dst = out.data() + r * w;
        for (std::size_t x = 0; x < w; ++x) dst[x] = src[w - 1 - x];
    }
    return out;
}

// ---- samples ------------------------------------------------------------------

Sample make_lr_pair(const Tensor& hr_raw, std::size_t label) {
    if (hr_raw.rank() != 3 || hr_raw.dim(0) != 3)
        throw std::invalid_argument("make_lr_pair: expected [3,H,W], got " + shape_str(hr_raw));
    const std::size_t h = hr_raw.dim(1), w = hr_raw.dim(2);
    if (h % 4 != 0 || w % 4 != 0)
        throw std::invalid_argument("make_lr_pair: dims " + shape_str(hr_raw) +
                                    " must be divisible by 4");
    Tensor down = bicubic_resize(hr_raw, h / 4, w / 4);
    Tensor up = bicubic_resize(down, h, w);
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = std::clamp(up[i], 0.0, 255.0);
    Sample s;
    s.lr_upscaled = normalize_image(up);
    s.hr = normalize_image(hr_raw);
    s.label = label;
    return s;
}

// ---- synthetic identities -----------------------------------------------------

void SyntheticSpec::validate() const {
    if (classes < 2) throw std::invalid_argument("synthetic spec: need at least 2 classes");
    if (samples_per_class < 2)
        throw std::invalid_argument("synthetic spec: need at least 2 samples per class");
    if (height % 4 != 0 || width % 4 != 0 || height < 8 || width < 8)
        throw std::invalid_argument("synthetic spec: dims must be >= 8 and divisible by 4");
    if (train_classes >= classes && verification_pairs > 0)
        throw std::invalid_argument("synthetic spec: no classes left for the held-out split");
    if (verification_pairs > 0 && classes - train_classes < 2)
        throw std::invalid_argument(
            "synthetic spec: verification pairs need at least two held-out identities");
    if (verification_pairs % 2 != 0)
        throw std::invalid_argument("synthetic spec: pair count must be even to balance");
    if (min_blobs < 3 || max_blobs < min_blobs)
        throw std::invalid_argument("synthetic spec: blob count range must be within [3, n]");
    if (position_jitter < 0.0 || brightness_jitter < 0.0 || noise_sigma < 0.0)
        throw std::invalid_argument("synthetic spec: jitter amounts must be non-negative");
}

namespace {

struct Blob {
    bool ellipse = true;
    double cx = 0.0, cy = 0.0;  // pixels
    double rx = 1.0, ry = 1.0;  // half-extents, pixels
    double color[3] = {0.0, 0.0, 0.0};
};

struct IdentityLatent {
    std::vector<Blob> blobs;
    double background[3] = {0.0, 0.0, 0.0};
};

IdentityLatent draw_identity(Rng& rng, const SyntheticSpec& spec) {
    IdentityLatent id;
    for (double& ch : id.background) ch = rng.next_uniform(20.0, 60.0);
    const std::size_t blobs =
        spec.min_blobs + rng.next_below(spec.max_blobs - spec.min_blobs + 1);
    const std::size_t bars = 1 + rng.next_below(2);  // thin strokes, 1 or 2
    const double w = static_cast<double>(spec.width), h = static_cast<double>(spec.height);
    for (std::size_t b = 0; b < blobs; ++b) {
        Blob blob;
        blob.cx = rng.next_uniform(0.15, 0.85) * w;
        blob.cy = rng.next_uniform(0.15, 0.85) * h;
        if (b + bars >= blobs) {
            // a roughly one-pixel bar: high-frequency detail that a 4x
            // down-up round trip cannot represent. Kept thin and short so
            // the detail loss stays inside the pinned quality band.
            blob.ellipse = false;
            const bool vertical = rng.next_bool();
            const double thickness = rng.next_uniform(0.40, 0.65);  // half-extent
            if (vertical) {
                blob.rx = thickness;
                blob.ry = rng.next_uniform(0.18, 0.30) * h;
            } else {
                blob.rx = rng.next_uniform(0.18, 0.30) * w;
                blob.ry = thickness;
            }
            for (double& ch : blob.color) ch = rng.next_uniform(170.0, 230.0);
        } else {
            blob.ellipse = rng.next_bool();
            blob.rx = rng.next_uniform(0.10, 0.22) * w;
            blob.ry = rng.next_uniform(0.10, 0.22) * h;
            for (double& ch : blob.color) ch = rng.next_uniform(60.0, 200.0);
        }
        id.blobs.push_back(blob);
    }
    return id;
}

/// Two identities are "too close" when they have the same layout and every
/// index-matched blob center is within the separation radius.
bool too_close(const IdentityLatent& a, const IdentityLatent& b, double min_sep) {
    if (a.blobs.size() != b.blobs.size()) return false;
    for (std::size_t i = 0; i < a.blobs.size(); ++i) {
        const double dx = a.blobs[i].cx - b.blobs[i].cx;
        const double dy = a.blobs[i].cy - b.blobs[i].cy;
        if (std::sqrt(dx * dx + dy * dy) >= min_sep) return false;
    }
    return true;
}

Tensor render_sample(const IdentityLatent& id, const SyntheticSpec& spec, Rng& rng) {
    const std::size_t h = spec.height, w = spec.width;
    Tensor img({3, h, w});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < h * w; ++i) img.data()[c * h * w + i] = id.background[c];

    const double jx = rng.next_uniform(-spec.position_jitter, spec.position_jitter) *
                      static_cast<double>(w);
    const double jy = rng.next_uniform(-spec.position_jitter, spec.position_jitter) *
                      static_cast<double>(h);
    const double bright =
        1.0 + rng.next_uniform(-spec.brightness_jitter, spec.brightness_jitter);

    // Width of every shape's edge ramp, in pixels. Narrow enough that the
    // 4x down-up round trip smears it several-fold (the detail the restorer
    // has to put back), wide enough that the full-resolution render itself
    // stays clean. Re-steepening a smeared ramp only needs local context,
    // so the restoration stays learnable by small convolutions.
    constexpr double kSoftEdge = 1.0;

    for (const Blob& blob : id.blobs) {
        const double cx = blob.cx + jx, cy = blob.cy + jy;
        for (std::size_t y = 0; y < h; ++y) {
            for (std::size_t x = 0; x < w; ++x) {
                // Approximate signed distance to the outline in pixels
                // (positive inside), mapped to a linear opacity ramp.
                const double dx = static_cast<double>(x) - cx;
                const double dy = static_cast<double>(y) - cy;
                double dist;
                if (blob.ellipse) {
                    const double nx = dx / blob.rx, ny = dy / blob.ry;
                    dist = (1.0 - std::sqrt(nx * nx + ny * ny)) *
                           std::min(blob.rx, blob.ry);
                } else {
                    dist = std::min(blob.rx - std::abs(dx), blob.ry - std::abs(dy));
                }
                const double coverage = std::clamp(0.5 + dist / kSoftEdge, 0.0, 1.0);
                if (coverage <= 0.0) continue;
                for (std::size_t c = 0; c < 3; ++c)
                    img(c, y, x) =
                        (1.0 - coverage) * img(c, y, x) + coverage * blob.color[c] * bright;
            }
        }
    }

    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = std::clamp(img[i] + rng.next_normal(0.0, spec.noise_sigma), 0.0, 255.0);
    return img;
}

}  // namespace

Dataset generate_synthetic_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng base(seed);

    // identity latents come from one stream so separation retries stay
    // deterministic regardless of how many draws each identity consumed
    Rng id_stream = base.split(1);
    std::vector<IdentityLatent> identities;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        IdentityLatent candidate = draw_identity(id_stream, spec);
        bool clashes = true;
        while (clashes) {
            clashes = false;
            for (const auto& other : identities) {
                if (too_close(candidate, other, spec.min_center_separation)) {
                    clashes = true;
                    candidate = draw_identity(id_stream, spec);
                    break;
                }
            }
        }
        identities.push_back(std::move(candidate));
    }

    Dataset ds;
    ds.classes = spec.classes;
    ds.train_classes = spec.train_classes;
    ds.height = spec.height;
    ds.width = spec.width;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            Rng sample_rng = base.split(1000 + c * spec.samples_per_class + s);
            Tensor raw = render_sample(identities[c], spec, sample_rng);
            Sample sample = make_lr_pair(raw, c);
            if (c < spec.train_classes)
                ds.train.push_back(std::move(sample));
            else
                ds.test.push_back(std::move(sample));
        }
    }

    if (spec.verification_pairs > 0) {
        Rng pair_rng = base.split(777);
        const std::size_t test_classes = spec.classes - spec.train_classes;
        const std::size_t spc = spec.samples_per_class;
        for (std::size_t p = 0; p < spec.verification_pairs / 2; ++p) {
            // one same-identity pair
            const std::size_t tc = pair_rng.next_below(test_classes);
            const std::size_t s1 = pair_rng.next_below(spc);
            std::size_t s2 = pair_rng.next_below(spc);
            while (s2 == s1) s2 = pair_rng.next_below(spc);
            ds.pairs.push_back({tc * spc + s1, tc * spc + s2, true});
            // one cross-identity pair
            const std::size_t ca = pair_rng.next_below(test_classes);
            std::size_t cb = pair_rng.next_below(test_classes);
            while (cb == ca) cb = pair_rng.next_below(test_classes);
            ds.pairs.push_back({ca * spc + pair_rng.next_below(spc),
                                cb * spc + pair_rng.next_below(spc), false});
        }
    }
    return ds;
}

// ---- file formats -------------------------------------------------------------

namespace {
constexpr char kDatasetMagic[] = "JFDS";
constexpr std::uint32_t kDatasetVersion = 1;

void write_sample(std::ostream& out, const Sample& s) {
    io::write_u32(out, static_cast<std::uint32_t>(s.label));
    io::write_tensor(out, s.hr);
    io::write_tensor(out, s.lr_upscaled);
}

Sample read_sample(std::istream& in, const std::string& ctx, std::size_t classes,
                   std::size_t h, std::size_t w) {
    Sample s;
    s.label = io::read_u32(in, ctx);
    s.hr = io::read_tensor(in, ctx);
    s.lr_upscaled = io::read_tensor(in, ctx);
    const std::vector<std::size_t> want{3, h, w};
    if (s.hr.shape() != want || s.lr_upscaled.shape() != want)
        throw std::runtime_error(ctx + ": sample shape mismatch, got " + shape_str(s.hr) +
                                 " and " + shape_str(s.lr_upscaled));
    if (s.label >= classes)
        throw std::runtime_error(ctx + ": label " + std::to_string(s.label) +
                                 " out of range for " + std::to_string(classes) + " classes");
    return s;
}
}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    io::write_magic(out, kDatasetMagic);
    io::write_u32(out, kDatasetVersion);
    io::write_u64(out, ds.classes);
    io::write_u64(out, ds.train_classes);
    io::write_u64(out, ds.height);
    io::write_u64(out, ds.width);
    io::write_u64(out, ds.train.size());
    io::write_u64(out, ds.test.size());
    for (const Sample& s : ds.train) write_sample(out, s);
    for (const Sample& s : ds.test) write_sample(out, s);
    if (!out) throw std::runtime_error(path + ": write failed");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    io::expect_magic(in, kDatasetMagic, path);
    const std::uint32_t version = io::read_u32(in, path);
    if (version != kDatasetVersion)
        throw std::runtime_error(path + ": unsupported dataset version " +
                                 std::to_string(version));
    Dataset ds;
    ds.classes = io::read_u64(in, path);
    ds.train_classes = io::read_u64(in, path);
    ds.height = io::read_u64(in, path);
    ds.width = io::read_u64(in, path);
    const std::uint64_t n_train = io::read_u64(in, path);
    const std::uint64_t n_test = io::read_u64(in, path);
    for (std::uint64_t i = 0; i < n_train; ++i)
        ds.train.push_back(read_sample(in, path, ds.classes, ds.height, ds.width));
    for (std::uint64_t i = 0; i < n_test; ++i)
        ds.test.push_back(read_sample(in, path, ds.classes, ds.height, ds.width));
    return ds;
}

void save_pairs_csv(const std::vector<VerificationPair>& pairs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "index_a,index_b,same\n";
    for (const auto& p : pairs)
        out << p.a << ',' << p.b << ',' << (p.same ? 1 : 0) << '\n';
    if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<VerificationPair> load_pairs_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line) || line != "index_a,index_b,same")
        throw std::runtime_error(path + ": missing pair-list header");
    std::vector<VerificationPair> pairs;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream fields(line);
        VerificationPair p;
        char c1 = 0, c2 = 0;
        int same = -1;
        if (!(fields >> p.a >> c1 >> p.b >> c2 >> same) || c1 != ',' || c2 != ',' ||
            (same != 0 && same != 1) || (fields >> std::ws, !fields.eof()))
            throw std::runtime_error(path + ": malformed pair row " + std::to_string(row));
        p.same = same == 1;
        pairs.push_back(p);
    }
    return pairs;
}

void write_ppm(const Tensor& img_raw, const std::string& path) {
    if (img_raw.rank() != 3 || img_raw.dim(0) != 3)
        throw std::invalid_argument("write_ppm: expected [3,H,W], got " + shape_str(img_raw));
    const std::size_t h = img_raw.dim(1), w = img_raw.dim(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << "P6\n" << w << ' ' << h << "\n255\n";
    std::vector<unsigned char> bytes(h * w * 3);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = std::clamp(img_raw(c, y, x), 0.0, 255.0);
                bytes[(y * w + x) * 3 + c] = static_cast<unsigned char>(std::llround(v));
            }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error(path + ": write failed");
}

namespace {
/// Reads one whitespace-delimited PPM header token, skipping # comments.
std::string ppm_token(std::istream& in, const std::string& path) {
    std::string tok;
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!tok.empty()) return tok;
        } else {
            tok.push_back(static_cast<char>(ch));
        }
        ch = in.get();
    }
    if (tok.empty()) throw std::runtime_error(path + ": truncated header");
    return tok;
}
}  // namespace

Tensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    if (ppm_token(in, path) != "P6")
        throw std::runtime_error(path + ": not a binary PPM (P6) file");
    const unsigned long w = std::stoul(ppm_token(in, path));
    const unsigned long h = std::stoul(ppm_token(in, path));
    const unsigned long maxval = std::stoul(ppm_token(in, path));
    if (w == 0 || h == 0) throw std::runtime_error(path + ": zero image dimension");
    if (maxval != 255)
        throw std::runtime_error(path + ": unsupported max value " + std::to_string(maxval));
    std::vector<unsigned char> bytes(static_cast<std::size_t>(w) * h * 3);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (static_cast<std::size_t>(in.gcount()) != bytes.size())
        throw std::runtime_error(path + ": truncated pixel data");
    Tensor img({3, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                img(c, y, x) = static_cast<double>(bytes[(y * w + x) * 3 + c]);
    return img;
}

}  // namespace jfr
