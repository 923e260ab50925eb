#pragma once

// Small text-artifact helpers shared by the scenario runners and the
// command line front end. Numbers are always printed with %.17g so that a
// rerun reproduces every output file byte for byte.

#include <cstdint>
#include <string>
#include <string_view>

namespace collapsim {

std::string fmt_g17(double v);
std::string fmt_u64(std::uint64_t v);

// FNV-1a, used as the config identity in run manifests.
std::uint64_t fnv1a64(std::string_view text);
std::string hex16(std::uint64_t v);

// Throws std::runtime_error on failure; content is written whole.
void write_text_file(const std::string& path, std::string_view content);
std::string read_text_file(const std::string& path);

}  // namespace collapsim
