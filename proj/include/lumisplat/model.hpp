#pragma once

#include <vector>

#include "lumisplat/illumination.hpp"
#include "lumisplat/nn.hpp"
#include "lumisplat/scene.hpp"

namespace lumisplat {

// Everything trainable, plus the embedding table layout. Embedding row r
// belongs to the r-th training frame.
struct ModelState {
    GaussianSet set;
    DeformationField field;
    std::vector<double> embeddings;  // V x k, row-major
    int embed_dim = 32;
    ConcealingNetworks concealing;
    Mlp spatial;

    size_t embedding_rows() const {
        return embed_dim > 0 ? embeddings.size() / static_cast<size_t>(embed_dim) : 0;
    }
    std::span<const double> embedding_row(size_t r) const {
        return {embeddings.data() + r * embed_dim, static_cast<size_t>(embed_dim)};
    }
};

}  // namespace lumisplat
