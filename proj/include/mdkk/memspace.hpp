#ifndef MDKK_MEMSPACE_HPP
#define MDKK_MEMSPACE_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mdkk/error.hpp"

namespace mdkk
{

/// The two logical memory spaces. Both live in host memory; Device only
/// differs by its storage layout and its own copy of the data.
enum class Space : std::uint8_t
{
    Host = 0,
    Device = 1
};

const char* space_name(Space space);

inline Space other_space(Space space)
{
    return space == Space::Host ? Space::Device : Space::Host;
}

//---------------------------------------------------------------------------//
/*!
  \brief Storage order of a multi-dimensional array.

  order()[0] is the slowest varying dimension in memory and order().back()
  the fastest. right() is C order (last index fastest), left() is the
  transposed order (first index fastest).
*/
class LayoutPolicy
{
public:
    LayoutPolicy() = default;
    explicit LayoutPolicy(std::vector<std::size_t> order);

    static LayoutPolicy right(std::size_t rank);
    static LayoutPolicy left(std::size_t rank);

    const std::vector<std::size_t>& order() const { return order_; }
    std::size_t rank() const { return order_.size(); }

    /// Element strides for each logical dimension.
    std::vector<std::size_t> strides(std::span<const std::size_t> shape) const;

    bool operator==(const LayoutPolicy&) const = default;

private:
    std::vector<std::size_t> order_;
};

namespace detail
{
/// Product of extents; throws ConfigError on a zero extent or overflow of
/// the element count in bytes.
std::size_t checked_element_count(std::span<const std::size_t> shape, std::size_t element_size);
} // namespace detail

//---------------------------------------------------------------------------//
/*!
  \brief Array mirrored in two memory spaces with modification tracking.

  Writers call modify(space) after touching a space; readers call
  sync(space) before reading. A copy happens only when the target space is
  stale, and every such copy bumps transfer_count(). The two spaces may use
  different layouts, in which case sync transposes.

  Single writer: sync and modify must be externally serialized.
*/
template <class T>
class DualArray
{
public:
    DualArray() = default;

    explicit DualArray(std::vector<std::size_t> shape)
        : DualArray(shape, LayoutPolicy::right(shape.size()), LayoutPolicy::left(shape.size()))
    {
    }

    DualArray(std::vector<std::size_t> shape, LayoutPolicy host_layout, LayoutPolicy device_layout)
        : shape_(std::move(shape))
        , layouts_{std::move(host_layout), std::move(device_layout)}
    {
        if (shape_.empty()) {
            throw ConfigError("DualArray: shape must have at least one dimension");
        }
        for (const auto& layout : layouts_) {
            if (layout.rank() != shape_.size()) {
                throw ConfigError("DualArray: layout rank does not match shape rank");
            }
        }
        size_ = detail::checked_element_count(shape_, sizeof(T));
        for (std::size_t s = 0; s < 2; ++s) {
            strides_[s] = layouts_[s].strides(shape_);
            data_[s].assign(size_, T{});
        }
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t extent(std::size_t dim) const { return shape_[dim]; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return size_; }
    const LayoutPolicy& layout(Space space) const { return layouts_[index(space)]; }
    std::size_t stride(Space space, std::size_t dim) const { return strides_[index(space)][dim]; }

    T* data(Space space) { return data_[index(space)].data(); }
    const T* data(Space space) const { return data_[index(space)].data(); }

    /// Storage offset of a logical multi-index in the given space.
    std::size_t offset(Space space, std::span<const std::size_t> idx) const
    {
        const auto& st = strides_[index(space)];
        std::size_t off = 0;
        for (std::size_t d = 0; d < idx.size(); ++d) {
            off += idx[d] * st[d];
        }
        return off;
    }

    T& operator()(Space space, std::size_t i) { return data_[index(space)][i * strides_[index(space)][0]]; }
    const T& operator()(Space space, std::size_t i) const
    {
        return data_[index(space)][i * strides_[index(space)][0]];
    }

    T& operator()(Space space, std::size_t i, std::size_t j)
    {
        const auto& st = strides_[index(space)];
        return data_[index(space)][i * st[0] + j * st[1]];
    }
    const T& operator()(Space space, std::size_t i, std::size_t j) const
    {
        const auto& st = strides_[index(space)];
        return data_[index(space)][i * st[0] + j * st[1]];
    }

    T& at(Space space, std::span<const std::size_t> idx) { return data_[index(space)][offset(space, idx)]; }
    const T& at(Space space, std::span<const std::size_t> idx) const
    {
        return data_[index(space)][offset(space, idx)];
    }

    /// Marks `space` as holding the latest data. The other space must not
    /// carry unsynchronized modifications.
    void modify(Space space)
    {
        if (modified_[index(other_space(space))]) {
            throw Error(std::string("DualArray: modify(") + space_name(space) + ") while " +
                        space_name(other_space(space)) + " holds unsynchronized changes");
        }
        modified_[index(space)] = true;
    }

    bool modified(Space space) const { return modified_[index(space)]; }
    bool need_sync(Space space) const { return modified_[index(other_space(space))]; }

    /// Brings `space` up to date. Copies only when the other space was
    /// modified since the last sync.
    void sync(Space space)
    {
        const Space source = other_space(space);
        if (!modified_[index(source)]) {
            return;
        }
        copy_between(source, space);
        modified_[index(source)] = false;
        ++transfer_count_;
    }

    /// Clears both flags without copying.
    void clear_sync_state() { modified_ = {false, false}; }

    std::uint64_t transfer_count() const { return transfer_count_; }

    void fill(Space space, const T& value)
    {
        auto& buf = data_[index(space)];
        std::fill(buf.begin(), buf.end(), value);
    }

private:
    static std::size_t index(Space space) { return static_cast<std::size_t>(space); }

    void copy_between(Space from, Space to)
    {
        const auto& src = data_[index(from)];
        auto& dst = data_[index(to)];
        if (layouts_[0] == layouts_[1]) {
            std::copy(src.begin(), src.end(), dst.begin());
            return;
        }
        const auto& sf = strides_[index(from)];
        const auto& st = strides_[index(to)];
        if (shape_.size() == 2) {
            for (std::size_t i = 0; i < shape_[0]; ++i) {
                for (std::size_t j = 0; j < shape_[1]; ++j) {
                    dst[i * st[0] + j * st[1]] = src[i * sf[0] + j * sf[1]];
                }
            }
            return;
        }
        // General rank: walk logical indices with an odometer.
        std::vector<std::size_t> idx(shape_.size(), 0);
        for (std::size_t n = 0; n < size_; ++n) {
            std::size_t of = 0;
            std::size_t ot = 0;
            for (std::size_t d = 0; d < idx.size(); ++d) {
                of += idx[d] * sf[d];
                ot += idx[d] * st[d];
            }
            dst[ot] = src[of];
            for (std::size_t d = idx.size(); d-- > 0;) {
                if (++idx[d] < shape_[d]) {
                    break;
                }
                idx[d] = 0;
            }
        }
    }

    std::vector<std::size_t> shape_;
    std::array<LayoutPolicy, 2> layouts_;
    std::array<std::vector<std::size_t>, 2> strides_;
    std::array<std::vector<T>, 2> data_;
    std::array<bool, 2> modified_{false, false};
    std::size_t size_ = 0;
    std::uint64_t transfer_count_ = 0;
};

//---------------------------------------------------------------------------//
// Scatter accumulation
//---------------------------------------------------------------------------//

/// Write-deconfliction strategy for concurrent indexed accumulation.
struct AccumStrategy
{
    enum class Kind : std::uint8_t
    {
        Serial,
        Duplicate,
        Atomic
    };

    Kind kind = Kind::Serial;
    std::size_t copies = 1;

    static AccumStrategy serial() { return {Kind::Serial, 1}; }
    static AccumStrategy duplicate(std::size_t copies) { return {Kind::Duplicate, copies}; }
    static AccumStrategy atomic() { return {Kind::Atomic, 1}; }

    /// Number of concurrent contributors this strategy supports.
    std::size_t workers() const;
    std::string name() const;

    bool operator==(const AccumStrategy&) const = default;
};

/// Parses "serial", "atomic", "duplicate" or "duplicate:N".
AccumStrategy parse_strategy(const std::string& text);

struct Contribution
{
    std::size_t index;
    double value;
};

//---------------------------------------------------------------------------//
/*!
  \brief Dense accumulator for unstructured concurrent additions.

  Serial adds straight into the result and admits one contributor.
  Duplicate keeps one private buffer per worker and combines them in worker
  order on finalize(). Atomic performs relaxed atomic adds on one shared
  buffer. Worker ids passed to add() must be below workers().
*/
class ScatterAccumulator
{
public:
    ScatterAccumulator(std::size_t size, AccumStrategy strategy);

    std::size_t size() const { return size_; }
    const AccumStrategy& strategy() const { return strategy_; }
    std::size_t workers() const { return workers_; }

    void add(std::size_t worker, std::size_t index, double value)
    {
        if (index >= size_) {
            throw_out_of_range(index);
        }
        switch (strategy_.kind) {
        case AccumStrategy::Kind::Serial:
            buffers_[index] += value;
            break;
        case AccumStrategy::Kind::Duplicate:
            buffers_[worker * size_ + index] += value;
            break;
        case AccumStrategy::Kind::Atomic:
            std::atomic_ref<double>(buffers_[index]).fetch_add(value, std::memory_order_relaxed);
            break;
        }
    }

    /// Adds a 3-vector at rows*3.
    void add3(std::size_t worker, std::size_t row, const std::array<double, 3>& v)
    {
        add(worker, 3 * row, v[0]);
        add(worker, 3 * row + 1, v[1]);
        add(worker, 3 * row + 2, v[2]);
    }

    /// Barrier: combines staging buffers and returns the dense result.
    /// The accumulator is reset to zero afterwards.
    std::vector<double> finalize();

private:
    [[noreturn]] void throw_out_of_range(std::size_t index) const;

    std::size_t size_;
    AccumStrategy strategy_;
    std::size_t workers_;
    std::vector<double> buffers_;
};

/// Accumulates a batch of contributions with the accumulator's strategy,
/// running concurrently for Duplicate and Atomic.
std::vector<double> scatter_accumulate(ScatterAccumulator& acc, std::span<const Contribution> contributions);

} // namespace mdkk

#endif
