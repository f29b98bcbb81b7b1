#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gmmtree {

/// Fixed-length bit vector; in this library a set bit marks a missing variable.
class Mask {
public:
    Mask() = default;
    explicit Mask(std::size_t size) : size_(size), words_((size + 63) / 64, 0) {}

    std::size_t size() const noexcept { return size_; }

    bool test(std::size_t bit) const noexcept { return (words_[bit / 64] >> (bit % 64)) & 1u; }
    void set(std::size_t bit, bool value = true) noexcept {
        const std::uint64_t m = std::uint64_t{1} << (bit % 64);
        if (value) {
            words_[bit / 64] |= m;
        } else {
            words_[bit / 64] &= ~m;
        }
    }

    std::size_t count() const noexcept;
    bool any() const noexcept { return count() > 0; }

    /// Indices of set bits, ascending.
    std::vector<int> set_indices() const;
    /// Indices of clear bits, ascending.
    std::vector<int> clear_indices() const;

    /// Number of positions where the two masks differ.
    friend std::size_t hamming(const Mask& a, const Mask& b) noexcept;

    /// Hex digits of Σ 2^i over set bits i, most significant digit first,
    /// zero-padded to ceil(size / 4) digits.
    std::string to_hex() const;
    static Mask from_hex(const std::string& hex, std::size_t size);

    const std::vector<std::uint64_t>& words() const noexcept { return words_; }

    friend bool operator==(const Mask& a, const Mask& b) noexcept {
        return a.size_ == b.size_ && a.words_ == b.words_;
    }

private:
    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

struct MaskHash {
    std::size_t operator()(const Mask& m) const noexcept;
};

}  // namespace gmmtree
