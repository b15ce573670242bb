#include "hybrid_backend.hpp"

namespace sena {

std::shared_ptr<Backend> HybridBackend::snapshot() const {
    auto mock_copy = std::static_pointer_cast<MockBackend>(mock_->snapshot());
    auto toy_copy = std::static_pointer_cast<ToyBackend>(toy_->snapshot());
    return std::make_shared<HybridBackend>(std::move(mock_copy), std::move(toy_copy));
}

}  // namespace sena
