#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace cpplab {

// Ulam-Harris word over {0,1}; the empty string is the root.
using Label = std::string;

inline Label parent_of(const Label& u) {
    if (u.empty()) throw std::invalid_argument("root has no parent");
    return u.substr(0, u.size() - 1);
}

struct TreeNode {
    double alpha = 0.0;
    double omega = 0.0;
    std::optional<double> leaf_mass;
    bool censored = false;
};

// Binary simple tree. Reversed trees store heights (alpha > omega, boundary at 0).
class SimpleTree {
public:
    bool reversed = false;
    std::map<Label, TreeNode> nodes;

    bool contains(const Label& u) const { return nodes.count(u) != 0; }
    const TreeNode& at(const Label& u) const {
        auto it = nodes.find(u);
        if (it == nodes.end()) throw std::out_of_range("no node '" + u + "'");
        return it->second;
    }
    TreeNode& at(const Label& u) {
        auto it = nodes.find(u);
        if (it == nodes.end()) throw std::out_of_range("no node '" + u + "'");
        return it->second;
    }
    std::size_t size() const { return nodes.size(); }
    bool is_leaf(const Label& u) const { return !contains(u + "0"); }

    double lifetime(const Label& u) const {
        const auto& n = at(u);
        return reversed ? n.alpha - n.omega : n.omega - n.alpha;
    }

    std::vector<Label> leaves() const {
        std::vector<Label> out;
        for (const auto& [u, n] : nodes)
            if (is_leaf(u)) out.push_back(u);
        return out;
    }

    bool is_bud(const Label& u) const {
        if (!is_leaf(u)) return false;
        const auto& n = at(u);
        if (n.censored) return false;
        return reversed ? n.omega > 0.0 : std::isfinite(n.omega);
    }

    std::vector<Label> buds() const {
        std::vector<Label> out;
        for (const auto& [u, n] : nodes)
            if (is_bud(u)) out.push_back(u);
        return out;
    }

    double total_length() const {
        double s = 0.0;
        for (const auto& [u, n] : nodes) s += lifetime(u);
        return s;
    }

    void validate() const {
        if (!contains("")) throw std::logic_error("simple tree: root missing");
        for (const auto& [u, n] : nodes) {
            if (!(lifetime(u) > 0.0)) throw std::logic_error("simple tree: nonpositive lifetime at '" + u + "'");
            for (char c : u)
                if (c != '0' && c != '1') throw std::logic_error("simple tree: bad label '" + u + "'");
            if (!u.empty()) {
                auto p = parent_of(u);
                if (!contains(p)) throw std::logic_error("simple tree: parent of '" + u + "' missing");
                if (n.alpha != at(p).omega) throw std::logic_error("simple tree: alpha('" + u + "') != omega(parent)");
            }
            if (contains(u + "0") != contains(u + "1"))
                throw std::logic_error("simple tree: node '" + u + "' is not binary");
        }
    }

    bool operator==(const SimpleTree& o) const {
        if (reversed != o.reversed || nodes.size() != o.nodes.size()) return false;
        auto it = o.nodes.begin();
        for (const auto& [u, n] : nodes) {
            const auto& [v, m] = *it++;
            if (u != v || n.alpha != m.alpha || n.omega != m.omega || n.leaf_mass != m.leaf_mass ||
                n.censored != m.censored)
                return false;
        }
        return true;
    }
};

// a (+)_bud b with the signed lifetime algebra, valid for both orientations
inline SimpleTree graft(const SimpleTree& a, const Label& bud, const SimpleTree& b) {
    if (a.reversed != b.reversed) throw std::invalid_argument("graft: orientation mismatch");
    if (!a.contains(bud) || !a.is_bud(bud)) throw std::invalid_argument("graft: '" + bud + "' is not a bud");
    if (!b.contains("")) throw std::invalid_argument("graft: grafted tree has no root");
    SimpleTree out = a;
    const TreeNode& r2 = b.at("");
    TreeNode& nb = out.at(bud);
    // every time of b moves by the same shift, so shared endpoints stay equal
    const double shift = nb.omega - r2.alpha;
    nb.omega = r2.omega + shift;
    nb.leaf_mass = r2.leaf_mass;
    nb.censored = r2.censored;
    for (const auto& [u, n] : b.nodes) {
        if (u.empty()) continue;
        Label w = bud + u;
        if (out.contains(w)) throw std::logic_error("graft: label collision at '" + w + "'");
        TreeNode m = n;
        m.alpha = n.alpha + shift;
        m.omega = n.omega + shift;
        out.nodes.emplace(w, m);
    }
    return out;
}

inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Extended Newick: node names are Ulam-Harris labels, branch length is the
// lifetime, leaf masses and censor flags ride in [&...] comments.
inline std::string to_newick(const SimpleTree& t) {
    t.validate();
    std::string out;
    struct Frame {
        Label u;
        int stage;
    };
    std::vector<Frame> st{{"", 0}};
    while (!st.empty()) {
        Frame& f = st.back();
        if (!t.is_leaf(f.u) && f.stage < 2) {
            out += f.stage == 0 ? "(" : ",";
            Label child = f.u + (f.stage == 0 ? "0" : "1");
            ++f.stage;
            st.push_back({child, 0});
            continue;
        }
        if (!t.is_leaf(f.u)) out += ")";
        const auto& n = t.at(f.u);
        out += f.u.empty() ? "root" : "n" + f.u;
        std::vector<std::string> notes;
        if (n.leaf_mass) notes.push_back("mass=" + format_real(*n.leaf_mass));
        if (n.censored) notes.push_back("censored=1");
        if (!notes.empty()) {
            out += "[&";
            for (std::size_t i = 0; i < notes.size(); ++i) out += (i ? "," : "") + notes[i];
            out += "]";
        }
        out += ":" + format_real(t.lifetime(f.u));
        st.pop_back();
    }
    return out + ";";
}

inline nlohmann::json to_json(const SimpleTree& t) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& [u, n] : t.nodes) {
        nlohmann::json j = {{"label", u}, {"alpha", n.alpha}, {"omega", n.omega}};
        if (n.leaf_mass) j["leaf_mass"] = *n.leaf_mass;
        if (n.censored) j["censored"] = true;
        nodes.push_back(std::move(j));
    }
    return {{"reversed", t.reversed}, {"nodes", std::move(nodes)}};
}

inline SimpleTree simple_tree_from_json(const nlohmann::json& j) {
    SimpleTree t;
    t.reversed = j.at("reversed").get<bool>();
    for (const auto& n : j.at("nodes")) {
        TreeNode m;
        m.alpha = n.at("alpha").get<double>();
        m.omega = n.at("omega").get<double>();
        if (n.contains("leaf_mass")) m.leaf_mass = n.at("leaf_mass").get<double>();
        m.censored = n.value("censored", false);
        t.nodes.emplace(n.at("label").get<std::string>(), m);
    }
    t.validate();
    return t;
}

}  // namespace cpplab
