#ifndef CHIMATCH_TYPES_HPP
#define CHIMATCH_TYPES_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace chimatch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

using Rng = std::mt19937_64;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Collects non-fatal warnings. Functions taking a nullable Diagnostics*
// forward warnings to the process log when none is supplied.
struct Diagnostics {
    std::vector<std::string> warnings;

    void warn(std::string msg) { warnings.push_back(std::move(msg)); }
    bool empty() const { return warnings.empty(); }
};

void emit_warning(Diagnostics* diag, std::string msg);

// splitmix64 finalizer; used to derive independent per-replicate streams
// from a master seed so results do not depend on scheduling order.
constexpr std::uint64_t mix_seed(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream)
{
    return mix_seed(master ^ mix_seed(stream + 0x51ed270b27ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b)
{
    return derive_seed(derive_seed(master, a), b);
}

} // namespace chimatch

#endif // CHIMATCH_TYPES_HPP
