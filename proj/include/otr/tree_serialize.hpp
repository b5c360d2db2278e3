#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "otr/binary_io.hpp"
#include "otr/errors.hpp"
#include "otr/spatial_tree.hpp"

namespace otr {

// Versioned binary snapshot of a built tree.  Doubles are stored as raw
// IEEE-754 bit patterns, so save -> load reproduces the tree bit-exactly.
inline constexpr char kTreeMagic[] = "OTTREE1";
inline constexpr std::uint8_t kTreeFormatVersion = 1;

inline std::string serialize_tree(const SpatialTree& tree) {
    using namespace detail;
    std::string out;
    out.append(kTreeMagic, 7);
    put_u8(out, kTreeFormatVersion);
    put_u8(out, tree.config.family == TreeFamily::KD ? 0 : 1);
    put_f64(out, tree.config.eta);
    put_u32(out, tree.config.depth_limit);
    put_u64(out, tree.config.seed);
    put_u32(out, tree.dim);
    put_f64(out, tree.phi);
    put_u32(out, static_cast<std::uint32_t>(tree.root_lo.size()));
    for (double c : tree.root_lo) put_f64(out, c);
    put_u32(out, static_cast<std::uint32_t>(tree.nodes.size()));
    for (const TreeNode& node : tree.nodes) {
        put_i32(out, node.parent);
        put_f64(out, node.edge_weight);
        put_u32(out, node.split_count);
        put_i32(out, node.split_axis);
        put_f64(out, node.split_value);
        put_u32(out, static_cast<std::uint32_t>(node.children.size()));
        for (std::uint32_t c : node.children) put_u32(out, c);
        put_u32(out, static_cast<std::uint32_t>(node.points.size()));
        for (std::uint32_t p : node.points) put_u32(out, p);
        put_u32(out, static_cast<std::uint32_t>(node.cell_lo.size()));
        for (double c : node.cell_lo) put_f64(out, c);
    }
    put_u32(out, static_cast<std::uint32_t>(tree.point_to_leaf.size()));
    for (std::uint32_t leaf : tree.point_to_leaf) put_u32(out, leaf);
    return out;
}

inline SpatialTree deserialize_tree(const std::string& bytes) {
    using namespace detail;
    ByteReader r{bytes, 0, "tree blob"};
    r.need(7);
    if (bytes.compare(0, 7, kTreeMagic, 7) != 0)
        throw parse_error("tree blob: bad magic");
    r.pos = 7;
    const std::uint8_t version = r.u8();
    if (version != kTreeFormatVersion)
        throw parse_error("tree blob: unsupported format version " +
                          std::to_string(version));
    SpatialTree tree;
    const std::uint8_t fam = r.u8();
    if (fam > 1) throw parse_error("tree blob: bad tree family code");
    tree.config.family = fam == 0 ? TreeFamily::KD : TreeFamily::QUAD;
    tree.config.eta = r.f64();
    tree.config.depth_limit = r.u32();
    tree.config.seed = r.u64();
    tree.dim = r.u32();
    tree.phi = r.f64();
    tree.root_lo.resize(r.u32());
    for (double& c : tree.root_lo) c = r.f64();
    const std::uint32_t node_count = r.u32();
    tree.nodes.reserve(node_count);
    for (std::uint32_t v = 0; v < node_count; ++v) {
        TreeNode node;
        node.parent = r.i32();
        node.edge_weight = r.f64();
        node.split_count = r.u32();
        node.split_axis = r.i32();
        node.split_value = r.f64();
        node.children.resize(r.u32());
        for (std::uint32_t& c : node.children) c = r.u32();
        node.points.resize(r.u32());
        for (std::uint32_t& p : node.points) p = r.u32();
        node.cell_lo.resize(r.u32());
        for (double& c : node.cell_lo) c = r.f64();
        tree.nodes.push_back(std::move(node));
    }
    tree.point_to_leaf.resize(r.u32());
    for (std::uint32_t& leaf : tree.point_to_leaf) leaf = r.u32();
    r.expect_end();

    if (tree.nodes.empty()) throw parse_error("tree blob: no nodes");
    for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
        const TreeNode& node = tree.nodes[v];
        if (v == 0 ? node.parent != -1
                   : (node.parent < 0 || static_cast<std::size_t>(node.parent) >= v))
            throw parse_error("tree blob: bad parent link at node " + std::to_string(v));
        for (std::uint32_t c : node.children)
            if (c <= v || c >= tree.nodes.size())
                throw parse_error("tree blob: bad child link at node " +
                                  std::to_string(v));
    }
    for (std::uint32_t leaf : tree.point_to_leaf)
        if (leaf >= tree.nodes.size() || !tree.is_leaf(leaf))
            throw parse_error("tree blob: bad point-to-leaf entry");
    return tree;
}

inline void save_tree(const std::string& path, const SpatialTree& tree) {
    detail::write_file_bytes(path, serialize_tree(tree));
}

inline SpatialTree load_tree(const std::string& path) {
    try {
        return deserialize_tree(detail::read_file_bytes(path));
    } catch (const parse_error& e) {
        throw parse_error(path + ": " + e.what());
    }
}

}  // namespace otr
