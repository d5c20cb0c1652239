#ifndef PCN_DATAIO_HPP
#define PCN_DATAIO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcn/matrix.hpp"
#include "pcn/rng.hpp"

namespace pcn {

struct NormalizeParams {
    double mean = 0.5;
    double stddev = 0.5;
};

// A labeled dataset with flattened, normalized features. Immutable once
// loaded; iteration state lives in BatchIterator.
struct Dataset {
    Matrix<double> images;   // n x features
    std::vector<int> labels;
    Matrix<double> one_hot;  // n x classes
    std::size_t num_classes = 0;
    NormalizeParams norm;

    std::size_t size() const { return images.rows; }
    std::size_t feature_dim() const { return images.cols; }
};

// Raw pixel byte -> normalized feature and back.
inline double normalize_pixel(std::uint8_t p, const NormalizeParams& n) {
    return (static_cast<double>(p) / 255.0 - n.mean) / n.stddev;
}
inline double denormalize(double v, const NormalizeParams& n) {
    return v * n.stddev + n.mean;
}
inline double normalize_unit(double v01, const NormalizeParams& n) {
    return (v01 - n.mean) / n.stddev;
}

// Reads an IDX image/label file pair into a dataset. Magic numbers, ranks,
// and sample counts are validated; gzip-compressed files are detected by
// their leading bytes and inflated transparently.
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 const NormalizeParams& norm = {});

// Writes raw IDX containers (used by tests and the synthetic data tooling).
void write_idx_images(const std::string& path,
                      const std::vector<std::uint8_t>& pixels,
                      std::size_t count, std::size_t height, std::size_t width);
void write_idx_labels(const std::string& path,
                      const std::vector<std::uint8_t>& labels);

// Class-conditional Gaussian blobs; deterministic under the given rng.
Dataset synthetic_gaussian(std::size_t n, std::size_t dim, std::size_t classes,
                           Rng& rng);

// Deterministic fixed-seed shuffle followed by a split; the first result
// keeps (1 - held_out_fraction) of the samples.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds,
                                          double held_out_fraction,
                                          std::uint64_t seed);

// First n samples (handy for desk-scale subsets).
Dataset dataset_head(const Dataset& ds, std::size_t n);

struct Batch {
    Matrix<double> images;
    Matrix<double> targets;  // one-hot rows
    std::vector<int> labels;
};

// Seed-deterministic epoch permutations; the final partial batch is kept.
class BatchIterator {
public:
    BatchIterator(const Dataset& ds, std::size_t batch_size,
                  std::uint64_t seed, std::uint64_t epoch);

    std::optional<Batch> next();
    void reset(std::uint64_t epoch);

private:
    const Dataset& ds_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

// Formats a double with 17 significant digits, enough to round-trip.
std::string csv_double(double v);

// RFC 4180 output: CRLF line endings, quoting where required, written to a
// temp file and renamed into place.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);

}  // namespace pcn

#endif  // PCN_DATAIO_HPP
