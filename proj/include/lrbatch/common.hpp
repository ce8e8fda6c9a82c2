#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>

#if defined(_MSC_VER)
#define LRB_RESTRICT __restrict
#else
#define LRB_RESTRICT __restrict__
#endif

namespace lrbatch {

class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

class CapacityError : public std::runtime_error {
public:
    explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

inline void require_shape(bool ok, const std::string& msg) {
    if (!ok) throw ShapeError(msg);
}

// =============================================================================
// Aligned storage for packed buffers. Alignment must be a power of two and at
// least alignof(double); 64 matches the common cache line, 256 covers larger
// lines.
class AlignedArray {
public:
    AlignedArray() = default;

    AlignedArray(std::size_t count, std::size_t alignment = 64)
        : size_(count), alignment_(alignment) {
        if (count == 0) return;
        std::size_t bytes = ((count * sizeof(double) + alignment - 1) / alignment) * alignment;
        void* p = std::aligned_alloc(alignment, bytes);
        if (!p) throw std::bad_alloc();
        data_.reset(static_cast<double*>(p));
    }

    double* data() { return data_.get(); }
    const double* data() const { return data_.get(); }
    std::size_t size() const { return size_; }
    std::size_t alignment() const { return alignment_; }

    double& operator[](std::size_t i) { return data_.get()[i]; }
    double operator[](std::size_t i) const { return data_.get()[i]; }

private:
    struct FreeDeleter {
        void operator()(double* p) const { std::free(p); }
    };
    std::unique_ptr<double, FreeDeleter> data_;
    std::size_t size_ = 0;
    std::size_t alignment_ = 64;
};

// Seeded normal generator used for all randomized operands.
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : engine_(seed) {}

    double next() { return dist_(engine_); }

    void fill(double* dst, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) dst[i] = dist_(engine_);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

inline std::size_t round_up(std::size_t value, std::size_t multiple) {
    return ((value + multiple - 1) / multiple) * multiple;
}

} // namespace lrbatch
