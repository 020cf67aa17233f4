#include "lightning/io.hpp"

#include "lightning/rng.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lightning {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

Dataset Dataset::slice(std::size_t first, std::size_t count) const
{
    Dataset out;
    const std::size_t lo = std::min(first, size());
    const std::size_t hi = std::min(size(), lo + count);
    out.inputs.assign(inputs.begin() + lo, inputs.begin() + hi);
    out.labels.assign(labels.begin() + lo, labels.begin() + hi);
    return out;
}

Dataset conform(Dataset data, const Model& model)
{
    for (auto& x : data.inputs) {
        if (x.shape() == model.input_shape()) {
            continue;
        }
        if (x.size() != shape_product(model.input_shape())) {
            throw std::invalid_argument("input of shape " + shape_string(x.shape()) + " cannot feed model input " +
                                        shape_string(model.input_shape()));
        }
        x = x.reshaped(model.input_shape());
    }
    for (auto t : data.labels) {
        if (t >= model.class_count()) {
            throw std::invalid_argument("label " + std::to_string(t) + " outside the model's " +
                                        std::to_string(model.class_count()) + " classes");
        }
    }
    return data;
}

std::string_view to_string(FormatErrorKind kind)
{
    switch (kind) {
    case FormatErrorKind::Io: return "io";
    case FormatErrorKind::BadMagic: return "bad-magic";
    case FormatErrorKind::BadVersion: return "bad-version";
    case FormatErrorKind::Truncated: return "truncated";
    case FormatErrorKind::BadLayer: return "bad-layer";
    case FormatErrorKind::ShapeMismatch: return "shape-mismatch";
    case FormatErrorKind::CountMismatch: return "count-mismatch";
    }
    return "?";
}

FormatError::FormatError(FormatErrorKind kind, std::uint64_t offset, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + " at byte " + std::to_string(offset) + ": " + what),
      kind_(kind), offset_(offset)
{
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError(FormatErrorKind::Io, 0, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw FormatError(FormatErrorKind::Io, 0, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw FormatError(FormatErrorKind::Io, 0, "short write to " + path.string());
    }
}

namespace {

template <class T>
T swap_bytes(T v)
{
    if constexpr (sizeof(T) == 1) {
        return v;
    } else if constexpr (sizeof(T) == 2) {
        return static_cast<T>(__builtin_bswap16(v));
    } else if constexpr (sizeof(T) == 4) {
        return static_cast<T>(__builtin_bswap32(v));
    } else {
        return static_cast<T>(__builtin_bswap64(v));
    }
}

// Largest tensor a file may declare; guards allocations on corrupt input.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 26;

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, bool big_endian = false) : bytes_(bytes), big_(big_endian) {}

    std::uint64_t offset() const { return pos_; }
    std::uint64_t remaining() const { return bytes_.size() - pos_; }

    void need(std::uint64_t n, const char* what) const
    {
        if (remaining() < n) {
            throw FormatError(FormatErrorKind::Truncated, pos_,
                              std::string("need ") + std::to_string(n) + " bytes for " + what + ", " +
                                  std::to_string(remaining()) + " left");
        }
    }

    template <class T>
    T get(const char* what)
    {
        need(sizeof(T), what);
        T v{};
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        if (big_) {
            v = swap_bytes(v);
        }
        pos_ += sizeof(T);
        return v;
    }

    void floats(float* dst, std::size_t n, const char* what)
    {
        need(n * sizeof(float), what);
        std::memcpy(dst, bytes_.data() + pos_, n * sizeof(float));
        pos_ += n * sizeof(float);
    }

    std::span<const std::uint8_t> raw(std::uint64_t n, const char* what)
    {
        need(n, what);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::uint64_t pos_ = 0;
    bool big_;
};

template <class T>
void put(std::vector<std::uint8_t>& out, T v)
{
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
}

void put_floats(std::vector<std::uint8_t>& out, std::span<const float> v)
{
    const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
    out.insert(out.end(), p, p + v.size() * sizeof(float));
}

std::uint64_t checked_product(const std::vector<std::size_t>& dims, std::uint64_t at)
{
    std::uint64_t p = 1;
    for (auto d : dims) {
        if (d == 0 || d > kMaxElements || p * d > kMaxElements) {
            throw FormatError(FormatErrorKind::ShapeMismatch, at, "implausible shape " + shape_string(dims));
        }
        p *= d;
    }
    return p;
}

} // namespace

std::vector<std::uint8_t> encode_model(const Model& model)
{
    std::vector<std::uint8_t> out{'L', 'S', 'N', 'M'};
    put<std::uint16_t>(out, 1);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(model.layers().size()));
    for (const auto& l : model.layers()) {
        put<std::uint8_t>(out, static_cast<std::uint8_t>(l.kind));
        std::vector<std::uint32_t> params{static_cast<std::uint32_t>(l.input_shape.size())};
        for (auto d : l.input_shape) {
            params.push_back(static_cast<std::uint32_t>(d));
        }
        switch (l.kind) {
        case LayerKind::Conv2D:
            for (auto v : {l.out_channels, l.kernel_h, l.kernel_w, l.stride_h, l.stride_w, l.pad_h, l.pad_w}) {
                params.push_back(static_cast<std::uint32_t>(v));
            }
            break;
        case LayerKind::Dense:
            params.push_back(static_cast<std::uint32_t>(l.out_features));
            break;
        case LayerKind::MaxPool:
        case LayerKind::AvgPool:
            for (auto v : {l.kernel_h, l.kernel_w, l.stride_h, l.stride_w}) {
                params.push_back(static_cast<std::uint32_t>(v));
            }
            break;
        default:
            break;
        }
        put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
        for (auto p : params) {
            put(out, p);
        }
        put<std::uint64_t>(out, (l.weights.size() + l.bias.size()) * sizeof(float));
        put_floats(out, l.weights.values());
        put_floats(out, l.bias.values());
    }
    return out;
}

Model decode_model(std::span<const std::uint8_t> bytes)
{
    Reader r(bytes);
    auto magic = r.raw(4, "magic");
    if (std::memcmp(magic.data(), "LSNM", 4) != 0) {
        throw FormatError(FormatErrorKind::BadMagic, 0, "not an LSNM model file");
    }
    const auto version = r.get<std::uint16_t>("version");
    if (version != 1) {
        throw FormatError(FormatErrorKind::BadVersion, 4, "unsupported LSNM version " + std::to_string(version));
    }
    const auto count = r.get<std::uint16_t>("layer count");
    if (count == 0) {
        throw FormatError(FormatErrorKind::BadLayer, 6, "model declares no layers");
    }

    std::vector<LayerSpec> layers;
    std::vector<std::size_t> prev_out;
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t start = r.offset();
        const std::string name = "layer " + std::to_string(i);
        const auto kind_byte = r.get<std::uint8_t>("layer kind");
        if (kind_byte < 1 || kind_byte > 7) {
            throw FormatError(FormatErrorKind::BadLayer, start, name + " has unknown kind " + std::to_string(kind_byte));
        }
        LayerSpec l;
        l.kind = static_cast<LayerKind>(kind_byte);

        const std::uint64_t params_at = r.offset();
        const auto n_params = r.get<std::uint32_t>("parameter count");
        r.need(std::uint64_t{n_params} * 4, "layer parameters");
        std::vector<std::uint32_t> p(n_params);
        for (auto& v : p) {
            v = r.get<std::uint32_t>("layer parameter");
        }
        if (p.empty() || p[0] == 0 || p[0] > 4 || p.size() < 1 + p[0]) {
            throw FormatError(FormatErrorKind::BadLayer, params_at, name + " has a malformed input shape");
        }
        l.input_shape.assign(p.begin() + 1, p.begin() + 1 + p[0]);
        checked_product(l.input_shape, params_at);
        std::span<const std::uint32_t> extra(p.data() + 1 + p[0], p.size() - 1 - p[0]);
        std::size_t want_extra = 0;
        switch (l.kind) {
        case LayerKind::Conv2D: want_extra = 7; break;
        case LayerKind::Dense: want_extra = 1; break;
        case LayerKind::MaxPool:
        case LayerKind::AvgPool: want_extra = 4; break;
        default: break;
        }
        if (extra.size() != want_extra) {
            throw FormatError(FormatErrorKind::BadLayer, params_at,
                              name + " (" + std::string(to_string(l.kind)) + ") expects " +
                                  std::to_string(want_extra) + " kind parameters, got " +
                                  std::to_string(extra.size()));
        }
        if (l.kind == LayerKind::Conv2D) {
            l.out_channels = extra[0];
            l.kernel_h = extra[1];
            l.kernel_w = extra[2];
            l.stride_h = extra[3];
            l.stride_w = extra[4];
            l.pad_h = extra[5];
            l.pad_w = extra[6];
        } else if (l.kind == LayerKind::Dense) {
            l.out_features = extra[0];
        } else if (want_extra == 4) {
            l.kernel_h = extra[0];
            l.kernel_w = extra[1];
            l.stride_h = extra[2];
            l.stride_w = extra[3];
        }
        if (i > 0 && l.input_shape != prev_out) {
            throw FormatError(FormatErrorKind::ShapeMismatch, params_at,
                              name + " input " + shape_string(l.input_shape) + " does not match previous output " +
                                  shape_string(prev_out));
        }
        try {
            prev_out = l.output_shape();
        } catch (const std::invalid_argument& e) {
            throw FormatError(FormatErrorKind::BadLayer, params_at, name + ": " + e.what());
        }
        checked_product(prev_out, params_at);

        std::vector<std::size_t> wshape, bshape;
        if (l.kind == LayerKind::Conv2D) {
            wshape = {l.out_channels, l.input_shape[0], l.kernel_h, l.kernel_w};
            bshape = {l.out_channels};
        } else if (l.kind == LayerKind::Dense) {
            wshape = {l.out_features, l.input_shape[0]};
            bshape = {l.out_features};
        }
        const std::uint64_t nw = wshape.empty() ? 0 : checked_product(wshape, params_at);
        const std::uint64_t nb = bshape.empty() ? 0 : bshape[0];

        const std::uint64_t blob_at = r.offset();
        const auto blob_len = r.get<std::uint64_t>("weight blob length");
        if (blob_len != (nw + nb) * sizeof(float)) {
            throw FormatError(FormatErrorKind::ShapeMismatch, blob_at,
                              name + " blob holds " + std::to_string(blob_len) + " bytes, shape needs " +
                                  std::to_string((nw + nb) * sizeof(float)));
        }
        r.need(blob_len, "weight blob");
        if (nw) {
            l.weights = Tensor(wshape);
            r.floats(l.weights.values().data(), nw, "weights");
            l.bias = Tensor(bshape);
            r.floats(l.bias.values().data(), nb, "bias");
        }
        layers.push_back(std::move(l));
    }
    if (r.remaining() != 0) {
        throw FormatError(FormatErrorKind::CountMismatch, r.offset(),
                          std::to_string(r.remaining()) + " trailing bytes after the last layer");
    }
    try {
        return Model(std::move(layers));
    } catch (const std::invalid_argument& e) {
        throw FormatError(FormatErrorKind::ShapeMismatch, bytes.size(), e.what());
    }
}

Model load_model(const std::filesystem::path& path)
{
    const auto bytes = read_file(path);
    try {
        return decode_model(bytes);
    } catch (const FormatError& e) {
        throw FormatError(e.kind(), e.offset(), path.string() + ": " + e.what());
    }
}

void save_model(const Model& model, const std::filesystem::path& path)
{
    write_file(path, encode_model(model));
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels)
{
    const auto ib = read_file(images);
    const auto lb = read_file(labels);
    Reader ri(ib, true), rl(lb, true);
    if (ri.get<std::uint32_t>("image magic") != 0x00000803) {
        throw FormatError(FormatErrorKind::BadMagic, 0, images.string() + " is not an IDX image file");
    }
    if (rl.get<std::uint32_t>("label magic") != 0x00000801) {
        throw FormatError(FormatErrorKind::BadMagic, 0, labels.string() + " is not an IDX label file");
    }
    const std::uint32_t n = ri.get<std::uint32_t>("image count");
    const std::uint32_t rows = ri.get<std::uint32_t>("rows");
    const std::uint32_t cols = ri.get<std::uint32_t>("cols");
    const std::uint32_t nl = rl.get<std::uint32_t>("label count");
    if (n != nl) {
        throw FormatError(FormatErrorKind::CountMismatch, 4,
                          std::to_string(n) + " images but " + std::to_string(nl) + " labels");
    }
    if (rows == 0 || cols == 0) {
        throw FormatError(FormatErrorKind::ShapeMismatch, 8, "zero image dimension");
    }
    const std::uint64_t px = std::uint64_t{rows} * cols;
    ri.need(px * n, "pixels");
    rl.need(n, "labels");
    Dataset d;
    d.inputs.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        auto raw = ri.raw(px, "pixels");
        Tensor t({rows, cols});
        for (std::uint64_t k = 0; k < px; ++k) {
            t[k] = static_cast<float>(raw[k]) / 255.0f;
        }
        d.inputs.push_back(std::move(t));
        d.labels.push_back(rl.get<std::uint8_t>("label"));
    }
    return d;
}

void save_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
              std::span<const std::uint8_t> pixels, std::size_t rows, std::size_t cols,
              std::span<const std::uint8_t> labels_data)
{
    if (pixels.size() != labels_data.size() * rows * cols) {
        throw std::invalid_argument("pixel count does not match labels x rows x cols");
    }
    auto be = [](std::vector<std::uint8_t>& out, std::uint32_t v) { put(out, swap_bytes(v)); };
    std::vector<std::uint8_t> ib, lb;
    be(ib, 0x00000803);
    be(ib, static_cast<std::uint32_t>(labels_data.size()));
    be(ib, static_cast<std::uint32_t>(rows));
    be(ib, static_cast<std::uint32_t>(cols));
    ib.insert(ib.end(), pixels.begin(), pixels.end());
    be(lb, 0x00000801);
    be(lb, static_cast<std::uint32_t>(labels_data.size()));
    lb.insert(lb.end(), labels_data.begin(), labels_data.end());
    write_file(images, ib);
    write_file(labels, lb);
}

Dataset synth_dataset(std::size_t classes, std::size_t per_class, std::size_t dimension, std::uint64_t seed)
{
    if (classes == 0 || dimension == 0) {
        throw std::invalid_argument("synth_dataset needs positive class count and dimension");
    }
    const unsigned bits = std::max(1u, static_cast<unsigned>(std::bit_width(classes - 1)));
    Rng rng(seed);
    Dataset d;
    for (std::size_t i = 0; i < per_class; ++i) {
        for (std::size_t c = 0; c < classes; ++c) {
            Tensor x({dimension});
            for (std::size_t k = 0; k < dimension; ++k) {
                const float mean = (c >> (k % bits)) & 1 ? 3.0f : -3.0f;
                x[k] = mean + static_cast<float>(rng.normal());
            }
            d.inputs.push_back(std::move(x));
            d.labels.push_back(c);
        }
    }
    return d;
}

Fixture load_fixture(const std::filesystem::path& path)
{
    const auto bytes = read_file(path);
    Reader r(bytes);
    auto magic = r.raw(4, "magic");
    if (std::memcmp(magic.data(), "LSNF", 4) != 0) {
        throw FormatError(FormatErrorKind::BadMagic, 0, path.string() + " is not a fixture file");
    }
    Fixture f;
    const auto n = r.get<std::uint32_t>("item count");
    f.classes = r.get<std::uint32_t>("class count");
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank == 0 || rank > 4 || f.classes == 0) {
        throw FormatError(FormatErrorKind::ShapeMismatch, 12, "bad fixture header");
    }
    std::vector<std::size_t> shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
        shape.push_back(r.get<std::uint32_t>("dimension"));
    }
    const std::uint64_t per = checked_product(shape, 16);
    for (std::uint32_t i = 0; i < n; ++i) {
        Tensor x(shape);
        r.floats(x.values().data(), per, "fixture input");
        const auto label = r.get<std::uint32_t>("fixture label");
        std::vector<float> logits(f.classes);
        r.floats(logits.data(), f.classes, "fixture logits");
        f.data.inputs.push_back(std::move(x));
        f.data.labels.push_back(label);
        f.logits.push_back(std::move(logits));
    }
    if (r.remaining()) {
        throw FormatError(FormatErrorKind::CountMismatch, r.offset(), "trailing bytes in fixture");
    }
    return f;
}

} // namespace lightning
