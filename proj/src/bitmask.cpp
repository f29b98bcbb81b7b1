#include "gmmtree/bitmask.hpp"

#include <bit>
#include <stdexcept>

namespace gmmtree {

std::size_t Mask::count() const noexcept {
    std::size_t total = 0;
    for (std::uint64_t w : words_) {
        total += static_cast<std::size_t>(std::popcount(w));
    }
    return total;
}

std::vector<int> Mask::set_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < size_; ++i) {
        if (test(i)) {
            out.push_back(static_cast<int>(i));
        }
    }
    return out;
}

std::vector<int> Mask::clear_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < size_; ++i) {
        if (!test(i)) {
            out.push_back(static_cast<int>(i));
        }
    }
    return out;
}

std::size_t hamming(const Mask& a, const Mask& b) noexcept {
    std::size_t total = 0;
    for (std::size_t w = 0; w < a.words_.size(); ++w) {
        total += static_cast<std::size_t>(std::popcount(a.words_[w] ^ b.words_[w]));
    }
    return total;
}

std::string Mask::to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    const std::size_t digits = (size_ + 3) / 4;
    std::string out(digits, '0');
    for (std::size_t d = 0; d < digits; ++d) {
        unsigned nibble = 0;
        for (std::size_t b = 0; b < 4; ++b) {
            const std::size_t bit = d * 4 + b;
            if (bit < size_ && test(bit)) {
                nibble |= 1u << b;
            }
        }
        out[digits - 1 - d] = kDigits[nibble];
    }
    return out;
}

Mask Mask::from_hex(const std::string& hex, std::size_t size) {
    Mask m(size);
    const std::size_t digits = hex.size();
    for (std::size_t d = 0; d < digits; ++d) {
        const char c = hex[digits - 1 - d];
        unsigned nibble = 0;
        if (c >= '0' && c <= '9') {
            nibble = static_cast<unsigned>(c - '0');
        } else if (c >= 'a' && c <= 'f') {
            nibble = static_cast<unsigned>(c - 'a' + 10);
        } else if (c >= 'A' && c <= 'F') {
            nibble = static_cast<unsigned>(c - 'A' + 10);
        } else {
            throw std::invalid_argument("bad hex digit in mask");
        }
        for (std::size_t b = 0; b < 4; ++b) {
            if (nibble & (1u << b)) {
                const std::size_t bit = d * 4 + b;
                if (bit >= size) {
                    throw std::invalid_argument("hex mask wider than its size");
                }
                m.set(bit);
            }
        }
    }
    return m;
}

std::size_t MaskHash::operator()(const Mask& m) const noexcept {
    std::size_t h = std::hash<std::size_t>{}(m.size());
    for (std::uint64_t w : m.words()) {
        h ^= std::hash<std::uint64_t>{}(w) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

}  // namespace gmmtree
