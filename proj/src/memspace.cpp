#include "mdkk/memspace.hpp"

#include <numeric>

#include "mdkk/parallel.hpp"

namespace mdkk
{

const char* space_name(Space space)
{
    return space == Space::Host ? "host" : "device";
}

LayoutPolicy::LayoutPolicy(std::vector<std::size_t> order)
    : order_(std::move(order))
{
    std::vector<bool> seen(order_.size(), false);
    for (auto d : order_) {
        if (d >= order_.size() || seen[d]) {
            throw ConfigError("LayoutPolicy: order is not a permutation");
        }
        seen[d] = true;
    }
}

LayoutPolicy LayoutPolicy::right(std::size_t rank)
{
    std::vector<std::size_t> order(rank);
    std::iota(order.begin(), order.end(), std::size_t{0});
    return LayoutPolicy(std::move(order));
}

LayoutPolicy LayoutPolicy::left(std::size_t rank)
{
    std::vector<std::size_t> order(rank);
    std::iota(order.rbegin(), order.rend(), std::size_t{0});
    return LayoutPolicy(std::move(order));
}

std::vector<std::size_t> LayoutPolicy::strides(std::span<const std::size_t> shape) const
{
    std::vector<std::size_t> result(shape.size(), 0);
    std::size_t stride = 1;
    for (std::size_t k = order_.size(); k-- > 0;) {
        result[order_[k]] = stride;
        stride *= shape[order_[k]];
    }
    return result;
}

namespace detail
{
std::size_t checked_element_count(std::span<const std::size_t> shape, std::size_t element_size)
{
    const std::size_t limit = std::numeric_limits<std::size_t>::max() / element_size;
    std::size_t count = 1;
    for (auto extent : shape) {
        if (extent == 0) {
            throw ConfigError("DualArray: zero extent");
        }
        if (count > limit / extent) {
            throw ConfigError("DualArray: extents overflow the addressable size");
        }
        count *= extent;
    }
    return count;
}
} // namespace detail

//---------------------------------------------------------------------------//

std::size_t AccumStrategy::workers() const
{
    switch (kind) {
    case Kind::Serial:
        return 1;
    case Kind::Duplicate:
        return copies;
    case Kind::Atomic:
        return worker_count();
    }
    return 1;
}

std::string AccumStrategy::name() const
{
    switch (kind) {
    case Kind::Serial:
        return "serial";
    case Kind::Duplicate:
        return "duplicate:" + std::to_string(copies);
    case Kind::Atomic:
        return "atomic";
    }
    return "?";
}

AccumStrategy parse_strategy(const std::string& text)
{
    if (text == "serial") {
        return AccumStrategy::serial();
    }
    if (text == "atomic") {
        return AccumStrategy::atomic();
    }
    if (text == "duplicate") {
        return AccumStrategy::duplicate(worker_count());
    }
    const std::string prefix = "duplicate:";
    if (text.rfind(prefix, 0) == 0) {
        std::size_t pos = 0;
        long copies = 0;
        try {
            copies = std::stol(text.substr(prefix.size()), &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != text.size() - prefix.size() || copies <= 0) {
            throw ConfigError("bad duplicate copy count in '" + text + "'");
        }
        return AccumStrategy::duplicate(static_cast<std::size_t>(copies));
    }
    throw ConfigError("unknown accumulation strategy '" + text + "'");
}

ScatterAccumulator::ScatterAccumulator(std::size_t size, AccumStrategy strategy)
    : size_(size)
    , strategy_(strategy)
    , workers_(strategy.workers())
{
    if (strategy_.kind == AccumStrategy::Kind::Duplicate) {
        if (strategy_.copies == 0) {
            throw ConfigError("ScatterAccumulator: duplicate strategy needs at least one copy");
        }
        buffers_.assign(size_ * strategy_.copies, 0.0);
    } else {
        buffers_.assign(size_, 0.0);
    }
}

void ScatterAccumulator::throw_out_of_range(std::size_t index) const
{
    throw std::out_of_range("ScatterAccumulator: index " + std::to_string(index) + " outside [0, " +
                            std::to_string(size_) + ")");
}

std::vector<double> ScatterAccumulator::finalize()
{
    std::vector<double> result(size_, 0.0);
    if (strategy_.kind == AccumStrategy::Kind::Duplicate) {
        for (std::size_t c = 0; c < strategy_.copies; ++c) {
            const double* copy = buffers_.data() + c * size_;
            for (std::size_t i = 0; i < size_; ++i) {
                result[i] += copy[i];
            }
        }
        std::fill(buffers_.begin(), buffers_.end(), 0.0);
    } else {
        result.swap(buffers_);
        buffers_.assign(size_, 0.0);
    }
    return result;
}

std::vector<double> scatter_accumulate(ScatterAccumulator& acc, std::span<const Contribution> contributions)
{
    parallel_for(contributions.size(), acc.workers(), [&](std::size_t worker, std::size_t n) {
        acc.add(worker, contributions[n].index, contributions[n].value);
    });
    return acc.finalize();
}

} // namespace mdkk
