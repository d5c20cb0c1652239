#include "pcn/dataio.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "pcn/errors.hpp"

namespace pcn {

namespace {

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

bool is_gzip(const std::vector<std::uint8_t>& b) {
    return b.size() >= 2 && b[0] == 0x1f && b[1] == 0x8b;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in,
                                 const std::string& path) {
    z_stream zs;
    std::memset(&zs, 0, sizeof(zs));
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
        throw DataError("zlib init failed for " + path);
    std::vector<std::uint8_t> out;
    out.reserve(in.size() * 4);
    std::uint8_t buf[1 << 16];
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buf;
        zs.avail_out = sizeof(buf);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw DataError("gzip decompression failed for " + path +
                            " (zlib rc " + std::to_string(rc) + ")");
        }
        out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& bytes, std::string path)
        : bytes_(bytes), path_(std::move(path)) {}

    std::uint32_t read_u32_be() {
        if (pos_ + 4 > bytes_.size())
            throw DataError(path_ + ": truncated at offset " +
                            std::to_string(pos_) + " while reading u32");
        std::uint32_t v = (std::uint32_t(bytes_[pos_]) << 24) |
                          (std::uint32_t(bytes_[pos_ + 1]) << 16) |
                          (std::uint32_t(bytes_[pos_ + 2]) << 8) |
                          std::uint32_t(bytes_[pos_ + 3]);
        pos_ += 4;
        return v;
    }

    const std::uint8_t* take(std::size_t n) {
        if (pos_ + n > bytes_.size())
            throw DataError(path_ + ": truncated at offset " +
                            std::to_string(pos_) + ", needed " +
                            std::to_string(n) + " more bytes");
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }

    std::size_t pos() const { return pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::string path_;
    std::size_t pos_ = 0;
};

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

void write_u32_be(std::ofstream& out, std::uint32_t v) {
    const char b[4] = {char((v >> 24) & 0xff), char((v >> 16) & 0xff),
                       char((v >> 8) & 0xff), char(v & 0xff)};
    out.write(b, 4);
}

void finalize_one_hot(Dataset& ds) {
    int max_label = -1;
    for (int l : ds.labels) max_label = std::max(max_label, l);
    ds.num_classes = static_cast<std::size_t>(max_label + 1);
    if (ds.num_classes < 2) ds.num_classes = 2;
    ds.one_hot = Matrix<double>(ds.labels.size(), ds.num_classes);
    for (std::size_t i = 0; i < ds.labels.size(); ++i)
        ds.one_hot(i, static_cast<std::size_t>(ds.labels[i])) = 1.0;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const NormalizeParams& norm) {
    std::vector<std::uint8_t> ib = read_file_bytes(images_path);
    if (is_gzip(ib)) ib = gunzip(ib, images_path);
    std::vector<std::uint8_t> lb = read_file_bytes(labels_path);
    if (is_gzip(lb)) lb = gunzip(lb, labels_path);

    ByteReader ir(ib, images_path);
    const std::uint32_t im = ir.read_u32_be();
    if (im != kIdxImagesMagic)
        throw DataError(images_path + ": bad image magic " +
                        std::to_string(im) + " at offset 0, expected " +
                        std::to_string(kIdxImagesMagic));
    const std::uint32_t count = ir.read_u32_be();
    const std::uint32_t height = ir.read_u32_be();
    const std::uint32_t width = ir.read_u32_be();

    ByteReader lr(lb, labels_path);
    const std::uint32_t lm = lr.read_u32_be();
    if (lm != kIdxLabelsMagic)
        throw DataError(labels_path + ": bad label magic " +
                        std::to_string(lm) + " at offset 0, expected " +
                        std::to_string(kIdxLabelsMagic));
    const std::uint32_t lcount = lr.read_u32_be();
    if (count != lcount)
        throw DataError("sample count mismatch: " + images_path + " has " +
                        std::to_string(count) + ", " + labels_path + " has " +
                        std::to_string(lcount));

    const std::size_t dim = std::size_t(height) * std::size_t(width);
    const std::uint8_t* pixels = ir.take(std::size_t(count) * dim);
    const std::uint8_t* labels = lr.take(count);

    Dataset ds;
    ds.norm = norm;
    ds.images = Matrix<double>(count, dim);
    ds.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = 0; j < dim; ++j)
            ds.images(i, j) = normalize_pixel(pixels[i * dim + j], norm);
        ds.labels[i] = static_cast<int>(labels[i]);
    }
    finalize_one_hot(ds);
    return ds;
}

void write_idx_images(const std::string& path,
                      const std::vector<std::uint8_t>& pixels,
                      std::size_t count, std::size_t height,
                      std::size_t width) {
    if (pixels.size() != count * height * width)
        throw DataError("write_idx_images: pixel buffer size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    write_u32_be(out, kIdxImagesMagic);
    write_u32_be(out, static_cast<std::uint32_t>(count));
    write_u32_be(out, static_cast<std::uint32_t>(height));
    write_u32_be(out, static_cast<std::uint32_t>(width));
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw DataError("short write to " + path);
}

void write_idx_labels(const std::string& path,
                      const std::vector<std::uint8_t>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    write_u32_be(out, kIdxLabelsMagic);
    write_u32_be(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
    if (!out) throw DataError("short write to " + path);
}

Dataset synthetic_gaussian(std::size_t n, std::size_t dim, std::size_t classes,
                           Rng& rng) {
    if (dim == 0 || classes == 0)
        throw ConfigError("synthetic_gaussian: dim and classes must be > 0");
    // Class means on a sphere of radius 4. With classes <= dim the mean
    // directions are orthonormal, so every pair sits 4*sqrt(2) sigma apart
    // and the blobs are reliably separable; otherwise random directions.
    Matrix<double> means;
    if (classes <= dim) {
        means = orthogonal_init<double>(classes, dim, 4.0, rng);
    } else {
        means = Matrix<double>(classes, dim);
        for (std::size_t c = 0; c < classes; ++c) {
            double norm2 = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                means(c, j) = rng.gaussian();
                norm2 += means(c, j) * means(c, j);
            }
            const double scale = 4.0 / std::sqrt(norm2 + 1e-12);
            for (std::size_t j = 0; j < dim; ++j) means(c, j) *= scale;
        }
    }

    Dataset ds;
    ds.images = Matrix<double>(n, dim);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng.uniform_below(classes);
        ds.labels[i] = static_cast<int>(c);
        for (std::size_t j = 0; j < dim; ++j)
            ds.images(i, j) = means(c, j) + rng.gaussian();
    }
    if (n == 0) ds.labels.clear();
    ds.num_classes = classes;
    ds.one_hot = Matrix<double>(n, classes);
    for (std::size_t i = 0; i < n; ++i)
        ds.one_hot(i, static_cast<std::size_t>(ds.labels[i])) = 1.0;
    return ds;
}

namespace {

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.norm = ds.norm;
    out.num_classes = ds.num_classes;
    out.images = Matrix<double>(rows.size(), ds.feature_dim());
    out.one_hot = Matrix<double>(rows.size(), ds.num_classes);
    out.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t r = rows[i];
        for (std::size_t j = 0; j < ds.feature_dim(); ++j)
            out.images(i, j) = ds.images(r, j);
        for (std::size_t j = 0; j < ds.num_classes; ++j)
            out.one_hot(i, j) = ds.one_hot(r, j);
        out.labels[i] = ds.labels[r];
    }
    return out;
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = rng.uniform_below(i);
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

}  // namespace

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds,
                                          double held_out_fraction,
                                          std::uint64_t seed) {
    if (held_out_fraction < 0.0 || held_out_fraction >= 1.0)
        throw ConfigError("split_dataset: fraction must be in [0, 1)");
    Rng rng(seed);
    std::vector<std::size_t> p = permutation(ds.size(), rng);
    const std::size_t held =
        static_cast<std::size_t>(held_out_fraction * double(ds.size()));
    std::vector<std::size_t> keep(p.begin(), p.end() - held);
    std::vector<std::size_t> out(p.end() - held, p.end());
    return {take_rows(ds, keep), take_rows(ds, out)};
}

Dataset dataset_head(const Dataset& ds, std::size_t n) {
    n = std::min(n, ds.size());
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    return take_rows(ds, rows);
}

BatchIterator::BatchIterator(const Dataset& ds, std::size_t batch_size,
                             std::uint64_t seed, std::uint64_t epoch)
    : ds_(ds), batch_size_(batch_size), seed_(seed) {
    if (batch_size_ == 0) throw ConfigError("BatchIterator: batch_size 0");
    reset(epoch);
}

void BatchIterator::reset(std::uint64_t epoch) {
    Rng rng = Rng(seed_).fork(epoch);
    order_ = permutation(ds_.size(), rng);
    cursor_ = 0;
}

std::optional<Batch> BatchIterator::next() {
    if (cursor_ >= order_.size()) return std::nullopt;
    const std::size_t n = std::min(batch_size_, order_.size() - cursor_);
    Batch b;
    b.images = Matrix<double>(n, ds_.feature_dim());
    b.targets = Matrix<double>(n, ds_.num_classes);
    b.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = order_[cursor_ + i];
        for (std::size_t j = 0; j < ds_.feature_dim(); ++j)
            b.images(i, j) = ds_.images(r, j);
        for (std::size_t j = 0; j < ds_.num_classes; ++j)
            b.targets(i, j) = ds_.one_hot(r, j);
        b.labels[i] = ds_.labels[r];
    }
    cursor_ += n;
    return b;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

std::string csv_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

bool needs_quoting(const std::string& s) {
    return s.find_first_of(",\"\r\n") != std::string::npos;
}

std::string quote_field(const std::string& s) {
    if (!needs_quoting(s)) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_row(std::ofstream& out, const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << ',';
        out << quote_field(row[i]);
    }
    out << "\r\n";
}

}  // namespace

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write " + tmp);
        write_row(out, header);
        for (const auto& row : rows) write_row(out, row);
        out.flush();
        if (!out) throw DataError("short write to " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw DataError("rename " + tmp + " -> " + path + " failed: " +
                        ec.message());
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    CsvTable table;
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());

    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool row_pending = false;
    auto end_field = [&]() {
        row.push_back(field);
        field.clear();
        row_pending = true;
    };
    auto end_row = [&]() {
        end_field();
        if (table.header.empty())
            table.header = std::move(row);
        else
            table.rows.push_back(std::move(row));
        row.clear();
        row_pending = false;
    };
    for (std::size_t i = 0; i < content.size(); ++i) {
        const char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            end_field();
            row_pending = true;
        } else if (c == '\r') {
            // consumed with the following newline
        } else if (c == '\n') {
            end_row();
        } else {
            field += c;
            row_pending = true;
        }
    }
    if (row_pending || !field.empty()) end_row();
    return table;
}

}  // namespace pcn
