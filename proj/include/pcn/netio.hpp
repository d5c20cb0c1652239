#ifndef PCN_NETIO_HPP
#define PCN_NETIO_HPP

#include <string>

#include "pcn/network.hpp"

namespace pcn {

// Versioned binary model container. Layout (all integers little-endian):
//   bytes 0..3   magic "PCN1"
//   u32          format version (currently 1)
//   u32          layer count
//   u8           loss (0 mse, 1 cross_entropy)
//   u8[3]        reserved, zero
//   per layer:
//     u32 rows, u32 cols, u8 activation, u8[3] reserved
//     f64 x rows*cols   weight, row-major
//     f64 x rows        bias
// Weights are stored as float64 regardless of the runtime precision mode.
void save_network(const Network<double>& net, const std::string& path);
Network<double> load_network(const std::string& path);

// Human-readable architecture descriptor written next to the container.
std::string network_descriptor_json(const Network<double>& net);
void save_network_with_descriptor(const Network<double>& net,
                                  const std::string& path);

}  // namespace pcn

#endif  // PCN_NETIO_HPP
