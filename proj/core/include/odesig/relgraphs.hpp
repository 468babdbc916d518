#pragma once

#include <string>
#include <vector>

#include "odesig/array2.hpp"
#include "odesig/tape.hpp"

namespace odesig {

// ROI centers with labels; coordinates in any consistent unit.
struct RoiAtlas {
    struct Entry {
        std::string label;
        double x = 0.0, y = 0.0, z = 0.0;
    };
    std::vector<Entry> entries;

    int size() const { return static_cast<int>(entries.size()); }
};

RoiAtlas load_atlas_json(const std::string& path);
void save_atlas_json(const std::string& path, const RoiAtlas& atlas);

// Per-graph GCN weights plus the linear map combining the two branches.
struct GcnParams {
    Array2 w_temporal; // d_k x d_g
    Array2 w_spatial;  // d_k x d_g
    Array2 w_fuse;     // (branch dims summed) x d_u
    Array2 b_fuse;     // 1 x d_u
};

struct GcnLeaves {
    Var w_temporal, w_spatial, w_fuse, b_fuse;
};

// Pairwise cosine similarity of rows of h, negatives clamped to zero.
// Diagonal is exactly 1. Throws on a zero-norm embedding, naming the ROI.
Array2 build_temporal_graph(const Array2& h);
Var build_temporal_graph(Tape& t, Var h);

// Binary adjacency: edge iff i != j and euclidean distance <= r. Zero diagonal.
Array2 build_spatial_graph(const RoiAtlas& atlas, double r);

// 20th percentile of the pairwise-distance distribution; used when no
// threshold is supplied.
double default_spatial_threshold(const RoiAtlas& atlas);

// ReLU( D^-1/2 (A+I) D^-1/2 H W ). A must be nonnegative with zero diagonal
// where a single self-loop is wanted; the +I term is added here.
Array2 gcn_layer(const Array2& h, const Array2& a, const Array2& w);
Var gcn_layer(Tape& t, Var h, Var a, Var w);

// u = concat(h_temporal, h_spatial) W + b
Array2 fuse(const Array2& h_temporal, const Array2& h_spatial, const GcnParams& p);
Var fuse(Tape& t, Var h_temporal, Var h_spatial, Var w_fuse, Var b_fuse);

// Zeroes the diagonal of a square node (constant mask multiply); used to feed
// the temporal graph into gcn_layer without double-counting self-loops.
Var zero_diagonal(Tape& t, Var a);

} // namespace odesig
