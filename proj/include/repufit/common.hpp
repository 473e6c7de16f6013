#pragma once

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace repufit {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kVersionString = "0.1.0";

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or contradictory user configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed runtime input (dimension mismatch etc).
class InputError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Requested derivative order exceeds what the object supports.
class UnsupportedOrderError : public Error {
public:
    using Error::Error;
};

/// A network violates the parameter constraints of a penalty regime.
class ConstraintError : public Error {
public:
    using Error::Error;
};

/// A neuron with zero inner weights under unit-sphere constraints.
class DegenerateNeuronError : public ConstraintError {
public:
    DegenerateNeuronError(std::size_t index, const std::string& what)
        : ConstraintError(what), neuron_index(index) {}
    std::size_t neuron_index;
};

/// Resource budget exceeded (rule too large, empty rule, ...).
class SizeError : public Error {
public:
    using Error::Error;
};

/// Malformed file; message carries the position when known.
class ParseError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

/// Non-finite objective during optimization; carries the iteration.
class DivergenceError : public NumericError {
public:
    DivergenceError(std::size_t iter, const std::string& what)
        : NumericError(what), iteration(iter) {}
    std::size_t iteration;
};

namespace detail {

/// Pairwise (cascade) reduction of term(i), i in [lo, hi).
/// Deterministic tree independent of threading, accurate to ~1e-16 relative.
template <class TermFn>
double pairwise_sum_range(std::size_t lo, std::size_t hi, const TermFn& term) {
    const std::size_t count = hi - lo;
    if (count <= 64) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += term(i);
        return s;
    }
    const std::size_t mid = lo + count / 2;
    return pairwise_sum_range(lo, mid, term) + pairwise_sum_range(mid, hi, term);
}

}  // namespace detail

template <class TermFn>
double pairwise_sum(std::size_t count, const TermFn& term) {
    if (count == 0) return 0.0;
    return detail::pairwise_sum_range(0, count, term);
}

inline double pairwise_sum(std::span<const double> values) {
    return pairwise_sum(values.size(), [&](std::size_t i) { return values[i]; });
}

/// Write `text` to `path` atomically (temp file in the same directory + rename).
inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    namespace fs = std::filesystem;
    fs::path dir = path.parent_path();
    if (dir.empty()) dir = fs::current_path();
    fs::create_directories(dir);
    fs::path tmp = dir / (path.filename().string() + ".tmp." + std::to_string(
                              std::hash<std::string>{}(path.string()) & 0xffffu));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open temporary file " + tmp.string());
        out << text;
        if (!out) throw Error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Run body(i) for i in [0, count) on up to `jobs` threads.
/// Work is split by contiguous blocks; results must be written to
/// per-index slots so the merge is deterministic.
template <class Body>
void parallel_for(std::size_t count, unsigned jobs, const Body& body) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, count));
    std::vector<std::thread> workers;
    workers.reserve(jobs);
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr first_error = nullptr;
    std::mutex error_mutex;
    for (unsigned t = 0; t < jobs; ++t) {
        workers.emplace_back([&]() {
            for (;;) {
                std::size_t i = cursor.fetch_add(1);
                if (i >= count) break;
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace repufit
