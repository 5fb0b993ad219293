#include "gola/adapter.hpp"

#include <numeric>

namespace gola {

void validate_permutation(const Permutation& perm, std::size_t size) {
    if (perm.size() != size) {
        throw ValidationError("permutation has length " + std::to_string(perm.size()) +
                              ", expected " + std::to_string(size));
    }
    std::vector<bool> seen(size, false);
    for (std::size_t v : perm) {
        if (v >= size) {
            throw ValidationError("permutation entry " + std::to_string(v) + " out of range [0, " +
                                  std::to_string(size) + ")");
        }
        if (seen[v]) {
            throw ValidationError("permutation repeats entry " + std::to_string(v));
        }
        seen[v] = true;
    }
}

Permutation identity_permutation(std::size_t size) {
    Permutation perm(size);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    return perm;
}

}  // namespace gola
