#pragma once

// Thin RAII owner of a pair of FFTW plans (forward/backward, unnormalized)
// operating on buffers the object owns. Planning goes through a process-wide
// mutex because the FFTW planner is not reentrant; execution is not locked.

#include "vfe/linalg.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstddef>
#include <mutex>
#include <new>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace vfe {

inline std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}

class Dft {
public:
    explicit Dft(std::size_t n, unsigned flags = FFTW_ESTIMATE) : n_(n)
    {
        if (n == 0)
            throw std::invalid_argument("Dft: length must be positive");
        in_ = fftw_alloc_complex(n);
        out_ = fftw_alloc_complex(n);
        if (in_ == nullptr || out_ == nullptr)
            throw std::bad_alloc();
        std::lock_guard lock(fftw_planner_mutex());
        const int len = static_cast<int>(n);
        fwd_ = fftw_plan_dft_1d(len, in_, out_, FFTW_FORWARD, flags);
        bwd_ = fftw_plan_dft_1d(len, in_, out_, FFTW_BACKWARD, flags);
        std::fill(input().begin(), input().end(), Complex{});
    }

    Dft(const Dft&) = delete;
    Dft& operator=(const Dft&) = delete;
    Dft(Dft&& o) noexcept { swap(o); }
    Dft& operator=(Dft&& o) noexcept
    {
        swap(o);
        return *this;
    }

    ~Dft()
    {
        if (fwd_ != nullptr || bwd_ != nullptr) {
            std::lock_guard lock(fftw_planner_mutex());
            if (fwd_)
                fftw_destroy_plan(fwd_);
            if (bwd_)
                fftw_destroy_plan(bwd_);
        }
        fftw_free(in_);
        fftw_free(out_);
    }

    std::size_t size() const { return n_; }
    std::span<Complex> input() { return {reinterpret_cast<Complex*>(in_), n_}; }
    std::span<const Complex> output() const { return {reinterpret_cast<const Complex*>(out_), n_}; }

    /// out[k] = sum_j in[j] e^{-2 pi i jk/n}
    void forward() { fftw_execute(fwd_); }
    /// out[j] = sum_k in[k] e^{+2 pi i jk/n}
    void backward() { fftw_execute(bwd_); }

private:
    void swap(Dft& o) noexcept
    {
        std::swap(n_, o.n_);
        std::swap(in_, o.in_);
        std::swap(out_, o.out_);
        std::swap(fwd_, o.fwd_);
        std::swap(bwd_, o.bwd_);
    }

    std::size_t n_ = 0;
    fftw_complex* in_ = nullptr;
    fftw_complex* out_ = nullptr;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

/// One-shot forward transform of a whole vector.
inline std::vector<Complex> dft_forward(std::span<const Complex> x)
{
    Dft dft(x.size());
    std::copy(x.begin(), x.end(), dft.input().begin());
    dft.forward();
    return {dft.output().begin(), dft.output().end()};
}

inline std::vector<Complex> dft_backward(std::span<const Complex> x)
{
    Dft dft(x.size());
    std::copy(x.begin(), x.end(), dft.input().begin());
    dft.backward();
    return {dft.output().begin(), dft.output().end()};
}

} // namespace vfe
