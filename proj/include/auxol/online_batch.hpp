#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "auxol/errors.hpp"

namespace auxol {

inline constexpr std::size_t kDefaultBatchCapacity = 32;

template <class Payload>
struct BatchEntry {
    Payload payload;
    double loss = 0.0;          // most recent known loss for this entry
    std::uint64_t insert_step = 0;
};

template <class Payload>
struct AdmitResult {
    bool admitted = false;
    std::optional<BatchEntry<Payload>> evicted;
};

/// Bounded store of rectified samples. When full, a newcomer replaces the entry
/// with the smallest stored loss if its own loss is at least that large; the
/// replacement takes over the evicted slot. Equal minima evict the oldest entry.
template <class Payload>
class OnlineBatch {
public:
    using Entry = BatchEntry<Payload>;

    explicit OnlineBatch(std::size_t capacity = kDefaultBatchCapacity) : capacity_(capacity) {
        if (capacity_ == 0) throw InvalidArgument("OnlineBatch: capacity must be >= 1");
    }

    AdmitResult<Payload> admit(Entry e) {
        if (!std::isfinite(e.loss) || e.loss < 0.0) throw InvalidArgument("OnlineBatch::admit: loss must be finite and >= 0");
        if (entries_.size() < capacity_) {
            entries_.push_back(std::move(e));
            return {true, std::nullopt};
        }
        const std::size_t m = min_index();
        if (e.loss >= entries_[m].loss) {
            AdmitResult<Payload> r{true, std::move(entries_[m])};
            entries_[m] = std::move(e);
            return r;
        }
        return {false, std::nullopt};
    }

    void refresh_losses(std::span<const double> new_losses) {
        if (new_losses.size() != entries_.size()) throw LengthMismatch("OnlineBatch::refresh_losses: length mismatch");
        for (double l : new_losses)
            if (!std::isfinite(l) || l < 0.0) throw InvalidArgument("OnlineBatch::refresh_losses: loss must be finite and >= 0");
        for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i].loss = new_losses[i];
    }

    /// Stable-order view of the stored entries for a training pass.
    std::span<const Entry> snapshot() const {
        if (entries_.empty()) throw EmptyBatch("OnlineBatch::snapshot: batch is empty");
        return entries_;
    }

    std::optional<double> smallest_loss() const {
        if (entries_.empty()) return std::nullopt;
        return entries_[min_index()].loss;
    }

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    bool full() const noexcept { return entries_.size() == capacity_; }
    std::size_t capacity() const noexcept { return capacity_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }

private:
    std::size_t min_index() const {
        std::size_t m = 0;
        for (std::size_t i = 1; i < entries_.size(); ++i) {
            const auto& a = entries_[i];
            const auto& b = entries_[m];
            if (a.loss < b.loss || (a.loss == b.loss && a.insert_step < b.insert_step)) m = i;
        }
        return m;
    }

    std::size_t capacity_;
    std::vector<Entry> entries_;
};

} // namespace auxol
