#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "pcn/dataio.hpp"
#include "pcn/errors.hpp"
#include "pcn/netio.hpp"
#include "pcn/training.hpp"

using namespace pcn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("pcn_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const {
        return (path / name).string();
    }
};

void gzip_file(const std::string& src, const std::string& dst) {
    std::ifstream in(src, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    gzFile out = gzopen(dst.c_str(), "wb");
    REQUIRE(out != nullptr);
    gzwrite(out, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(out);
}

}  // namespace

TEST_CASE("idx roundtrip recovers exact pixel values") {
    TempDir tmp;
    // two 2x2 images with distinctive bytes
    std::vector<std::uint8_t> pixels = {0, 64, 128, 255, 1, 2, 3, 4};
    write_idx_images(tmp.file("im.idx"), pixels, 2, 2, 2);
    write_idx_labels(tmp.file("lb.idx"), {7, 1});

    Dataset ds = load_idx(tmp.file("im.idx"), tmp.file("lb.idx"));
    REQUIRE(ds.size() == 2);
    REQUIRE(ds.feature_dim() == 4);
    CHECK(ds.labels[0] == 7);
    CHECK(ds.labels[1] == 1);
    // pixel 255 normalizes to (1.0 - 0.5) / 0.5 = 1.0
    CHECK(ds.images(0, 3) == doctest::Approx(1.0).epsilon(1e-15));
    // pixel 0 normalizes to -1
    CHECK(ds.images(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(ds.images(i, j) ==
                  doctest::Approx(normalize_pixel(pixels[i * 4 + j], ds.norm))
                      .epsilon(1e-15));
    CHECK(ds.one_hot(0, 7) == 1.0);
}

TEST_CASE("gzip-compressed idx files load transparently") {
    TempDir tmp;
    std::vector<std::uint8_t> pixels(2 * 3 * 3, 0);
    for (std::size_t i = 0; i < pixels.size(); ++i)
        pixels[i] = static_cast<std::uint8_t>(i * 13 % 256);
    write_idx_images(tmp.file("im.idx"), pixels, 2, 3, 3);
    write_idx_labels(tmp.file("lb.idx"), {0, 3});
    gzip_file(tmp.file("im.idx"), tmp.file("im.idx.gz"));
    gzip_file(tmp.file("lb.idx"), tmp.file("lb.idx.gz"));

    Dataset plain = load_idx(tmp.file("im.idx"), tmp.file("lb.idx"));
    Dataset gz = load_idx(tmp.file("im.idx.gz"), tmp.file("lb.idx.gz"));
    REQUIRE(gz.size() == plain.size());
    for (std::size_t i = 0; i < plain.images.size(); ++i)
        CHECK(gz.images.data[i] == plain.images.data[i]);
}

TEST_CASE("idx loader rejects bad magic, truncation, and count mismatch") {
    TempDir tmp;
    std::vector<std::uint8_t> pixels(4, 0);
    write_idx_images(tmp.file("im.idx"), pixels, 1, 2, 2);
    write_idx_labels(tmp.file("lb.idx"), {1});

    // wrong magic: labels file used as images
    try {
        load_idx(tmp.file("lb.idx"), tmp.file("lb.idx"));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("magic") != std::string::npos);
        CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
    }

    // truncated image payload
    {
        std::ofstream out(tmp.file("trunc.idx"), std::ios::binary);
        std::ifstream in(tmp.file("im.idx"), std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 2));
    }
    CHECK_THROWS_AS(load_idx(tmp.file("trunc.idx"), tmp.file("lb.idx")),
                    DataError);

    // count mismatch
    write_idx_labels(tmp.file("lb2.idx"), {1, 2});
    try {
        load_idx(tmp.file("im.idx"), tmp.file("lb2.idx"));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("mismatch") != std::string::npos);
    }
}

TEST_CASE("normalization is invertible") {
    NormalizeParams norm;
    for (int p = 0; p <= 255; ++p) {
        const double v01 = p / 255.0;
        const double n = normalize_unit(v01, norm);
        CHECK(std::fabs(denormalize(n, norm) - v01) <= 1e-12);
    }
}

TEST_CASE("synthetic_gaussian: determinism and empty case") {
    Rng a(5), b(5);
    Dataset d1 = synthetic_gaussian(50, 4, 3, a);
    Dataset d2 = synthetic_gaussian(50, 4, 3, b);
    for (std::size_t i = 0; i < d1.images.size(); ++i)
        CHECK(d1.images.data[i] == d2.images.data[i]);
    CHECK(d1.labels == d2.labels);

    Rng c(6);
    Dataset empty = synthetic_gaussian(0, 4, 3, c);
    CHECK(empty.size() == 0);
    CHECK(empty.num_classes == 3);
}

TEST_CASE("split_dataset: fixed seed reproduces the same split") {
    Rng rng(7);
    Dataset ds = synthetic_gaussian(100, 3, 2, rng);
    auto [tr1, va1] = split_dataset(ds, 0.1, 42);
    auto [tr2, va2] = split_dataset(ds, 0.1, 42);
    CHECK(tr1.size() == 90);
    CHECK(va1.size() == 10);
    CHECK(tr1.labels == tr2.labels);
    CHECK(va1.labels == va2.labels);
    for (std::size_t i = 0; i < va1.images.size(); ++i)
        CHECK(va1.images.data[i] == va2.images.data[i]);
    // a different seed shuffles differently
    auto [tr3, va3] = split_dataset(ds, 0.1, 43);
    bool same = va1.labels == va3.labels;
    if (same) {
        bool identical = true;
        for (std::size_t i = 0; i < va1.images.size(); ++i)
            identical = identical && va1.images.data[i] == va3.images.data[i];
        same = identical;
    }
    CHECK(!same);
}

TEST_CASE("batch iterator: partial final batch and per-epoch permutations") {
    Rng rng(8);
    Dataset ds = synthetic_gaussian(10, 2, 2, rng);
    BatchIterator it(ds, 4, 123, 0);
    std::vector<std::size_t> sizes;
    std::vector<int> seen;
    while (auto b = it.next()) {
        sizes.push_back(b->images.rows);
        for (int l : b->labels) seen.push_back(l);
    }
    CHECK(sizes == std::vector<std::size_t>{4, 4, 2});
    CHECK(seen.size() == 10);

    // the same epoch has the same order, a different epoch another one
    BatchIterator it0(ds, 10, 123, 0);
    BatchIterator it0b(ds, 10, 123, 0);
    BatchIterator it1(ds, 10, 123, 1);
    auto b0 = it0.next(), b0b = it0b.next(), b1 = it1.next();
    CHECK(b0->labels == b0b->labels);
    bool diff = b0->labels != b1->labels;
    if (!diff) {
        for (std::size_t i = 0; i < b0->images.size() && !diff; ++i)
            diff = b0->images.data[i] != b1->images.data[i];
    }
    CHECK(diff);
}

TEST_CASE("csv: header-only, roundtrip, and 17-digit floats") {
    TempDir tmp;
    const std::string path = tmp.file("empty.csv");
    write_csv(path, {"a", "b"}, {});
    CsvTable t = read_csv(path);
    CHECK(t.header == std::vector<std::string>{"a", "b"});
    CHECK(t.rows.empty());

    // doubles survive a write/parse cycle exactly
    Rng rng(9);
    std::vector<std::vector<std::string>> rows;
    std::vector<double> values;
    for (int i = 0; i < 20; ++i) {
        const double v = rng.gaussian() * std::pow(10.0, int(i) - 10);
        values.push_back(v);
        rows.push_back({csv_double(v)});
    }
    const std::string path2 = tmp.file("vals.csv");
    write_csv(path2, {"v"}, rows);
    CsvTable t2 = read_csv(path2);
    REQUIRE(t2.rows.size() == values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        CHECK(std::stod(t2.rows[i][0]) == values[i]);
}

TEST_CASE("csv: quoting of embedded commas and quotes, crlf line ends") {
    TempDir tmp;
    const std::string path = tmp.file("quoted.csv");
    write_csv(path, {"name", "note"},
              {{"a,b", "say \"hi\""}, {"plain", "line\nbreak"}});
    // raw bytes are RFC 4180
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    CHECK(content.find("\"a,b\"") != std::string::npos);
    CHECK(content.find("\"say \"\"hi\"\"\"") != std::string::npos);
    CHECK(content.find("\r\n") != std::string::npos);

    CsvTable t = read_csv(path);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][0] == "a,b");
    CHECK(t.rows[0][1] == "say \"hi\"");
    CHECK(t.rows[1][1] == "line\nbreak");
}

TEST_CASE("csv writes are atomic: no temp file remains") {
    TempDir tmp;
    const std::string path = tmp.file("x.csv");
    write_csv(path, {"a"}, {{"1"}});
    CHECK(fs::exists(path));
    CHECK(!fs::exists(path + ".tmp"));
}

TEST_CASE("pcn1 container roundtrips a network exactly") {
    TempDir tmp;
    Rng rng(10);
    Network<double> net = make_mlp<double>({3, 5, 4, 2}, Activation::gelu,
                                           Loss::cross_entropy, rng,
                                           std::nullopt, false);
    for (auto& l : net.layers)
        for (auto& b : l.bias) b = rng.gaussian();
    const std::string path = tmp.file("model.pcn1");
    save_network_with_descriptor(net, path);

    Network<double> back = load_network(path);
    CHECK(back.loss == net.loss);
    REQUIRE(back.layers.size() == net.layers.size());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        CHECK(back.layers[i].act == net.layers[i].act);
        for (std::size_t k = 0; k < net.layers[i].weight.size(); ++k)
            CHECK(back.layers[i].weight.data[k] ==
                  net.layers[i].weight.data[k]);
        for (std::size_t k = 0; k < net.layers[i].bias.size(); ++k)
            CHECK(back.layers[i].bias[k] == net.layers[i].bias[k]);
    }
    // magic bytes sit at the start of the container
    std::ifstream in(path, std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    CHECK(std::string(magic, 4) == "PCN1");
    // descriptor exists and mentions the loss
    std::ifstream dj(path + ".json");
    std::string desc((std::istreambuf_iterator<char>(dj)),
                     std::istreambuf_iterator<char>());
    CHECK(desc.find("cross_entropy") != std::string::npos);
}

TEST_CASE("pcn1 loader rejects corrupted containers") {
    TempDir tmp;
    const std::string path = tmp.file("bad.pcn1");
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE garbage";
    }
    CHECK_THROWS_AS(load_network(path), DataError);
}

TEST_CASE("write_metrics emits the documented schema") {
    TempDir tmp;
    std::vector<EpochMetrics> rows = {{0, 1.5, 0.25, 12.0}, {1, 0.75, 0.5, 11.0}};
    const std::string path = tmp.file("metrics.csv");
    write_metrics(path, rows);
    CsvTable t = read_csv(path);
    CHECK(t.header == std::vector<std::string>{"epoch", "train_loss",
                                               "val_accuracy", "wall_ms"});
    REQUIRE(t.rows.size() == 2);
    CHECK(std::stod(t.rows[0][1]) == 1.5);
    CHECK(std::stod(t.rows[1][2]) == 0.5);
}
