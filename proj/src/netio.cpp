#include "pcn/netio.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "pcn/errors.hpp"

namespace pcn {

namespace {

constexpr char kMagic[4] = {'P', 'C', 'N', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "PCN1 writer assumes a little-endian host");

void put_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

void put_u8(std::ofstream& out, std::uint8_t v) {
    out.write(reinterpret_cast<const char*>(&v), 1);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw DataError(path + ": truncated PCN1 header");
    return v;
}

std::uint8_t get_u8(std::ifstream& in, const std::string& path) {
    std::uint8_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 1);
    if (!in) throw DataError(path + ": truncated PCN1 header");
    return v;
}

}  // namespace

void save_network(const Network<double>& net, const std::string& path) {
    net.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(net.layers.size()));
    put_u8(out, net.loss == Loss::mse ? 0 : 1);
    put_u8(out, 0);
    put_u8(out, 0);
    put_u8(out, 0);
    for (const auto& l : net.layers) {
        put_u32(out, static_cast<std::uint32_t>(l.weight.rows));
        put_u32(out, static_cast<std::uint32_t>(l.weight.cols));
        put_u8(out, static_cast<std::uint8_t>(l.act));
        put_u8(out, 0);
        put_u8(out, 0);
        put_u8(out, 0);
        out.write(reinterpret_cast<const char*>(l.weight.data.data()),
                  static_cast<std::streamsize>(l.weight.size() * 8));
        out.write(reinterpret_cast<const char*>(l.bias.data()),
                  static_cast<std::streamsize>(l.bias.size() * 8));
    }
    if (!out) throw DataError("short write to " + path);
}

Network<double> load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError(path + ": not a PCN1 container (bad magic at offset 0)");
    const std::uint32_t version = get_u32(in, path);
    if (version != kVersion)
        throw DataError(path + ": unsupported PCN1 version " +
                        std::to_string(version));
    const std::uint32_t nl = get_u32(in, path);
    Network<double> net;
    const std::uint8_t loss = get_u8(in, path);
    if (loss > 1) throw DataError(path + ": invalid loss tag");
    net.loss = loss == 0 ? Loss::mse : Loss::cross_entropy;
    get_u8(in, path);
    get_u8(in, path);
    get_u8(in, path);

    for (std::uint32_t i = 0; i < nl; ++i) {
        Layer<double> l;
        const std::uint32_t rows = get_u32(in, path);
        const std::uint32_t cols = get_u32(in, path);
        const std::uint8_t act = get_u8(in, path);
        if (act > static_cast<std::uint8_t>(Activation::sigmoid))
            throw DataError(path + ": invalid activation tag in layer " +
                            std::to_string(i));
        l.act = static_cast<Activation>(act);
        get_u8(in, path);
        get_u8(in, path);
        get_u8(in, path);
        l.weight = Matrix<double>(rows, cols);
        l.bias.assign(rows, 0.0);
        in.read(reinterpret_cast<char*>(l.weight.data.data()),
                static_cast<std::streamsize>(l.weight.size() * 8));
        in.read(reinterpret_cast<char*>(l.bias.data()),
                static_cast<std::streamsize>(l.bias.size() * 8));
        if (!in)
            throw DataError(path + ": truncated payload in layer " +
                            std::to_string(i));
        net.layers.push_back(std::move(l));
    }
    net.validate();
    return net;
}

std::string network_descriptor_json(const Network<double>& net) {
    std::string s = "{\n  \"format\": \"PCN1\",\n  \"version\": 1,\n";
    s += "  \"loss\": \"" + std::string(loss_name(net.loss)) + "\",\n";
    s += "  \"layers\": [\n";
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        s += "    {\"in\": " + std::to_string(l.in_dim()) +
             ", \"out\": " + std::to_string(l.out_dim()) +
             ", \"activation\": \"" + activation_name(l.act) + "\"}";
        s += (i + 1 < net.layers.size()) ? ",\n" : "\n";
    }
    s += "  ]\n}\n";
    return s;
}

void save_network_with_descriptor(const Network<double>& net,
                                  const std::string& path) {
    save_network(net, path);
    std::ofstream out(path + ".json");
    if (!out) throw DataError("cannot write " + path + ".json");
    out << network_descriptor_json(net);
}

}  // namespace pcn
