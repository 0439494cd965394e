#include "smpconv/checkpoint.hpp"

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include "smpconv/errors.hpp"

namespace smp {

namespace {

using nlohmann::json;

json rows(std::span<const double> flat, std::size_t width) {
    json out = json::array();
    for (std::size_t i = 0; i < flat.size(); i += width) {
        out.push_back(std::vector<double>(flat.begin() + i, flat.begin() + i + width));
    }
    return out;
}

std::vector<double> flatten(const json& table, std::size_t n_rows, std::size_t width,
                            const char* field) {
    require(table.is_array() && table.size() == n_rows,
            std::string("checkpoint field '") + field + "' must have n_points rows");
    std::vector<double> flat;
    flat.reserve(n_rows * width);
    for (const json& row : table) {
        require(row.is_array() && row.size() == width,
                std::string("checkpoint field '") + field + "' has a row of the wrong width");
        for (const json& v : row) {
            require(v.is_number(), std::string("checkpoint field '") + field + "' must be numeric");
            flat.push_back(v.get<double>());
        }
    }
    return flat;
}

std::size_t read_count(const json& doc, const char* field) {
    require(doc.contains(field) && doc.at(field).is_number_unsigned(),
            std::string("checkpoint field '") + field + "' must be a non-negative integer");
    return doc.at(field).get<std::size_t>();
}

double read_number(const json& doc, const char* field) {
    require(doc.contains(field) && doc.at(field).is_number(),
            std::string("checkpoint field '") + field + "' must be a number");
    return doc.at(field).get<double>();
}

}  // namespace

json filter_to_json(const SmpFilter& filter) {
    json doc;
    doc["dim"] = filter.dim();
    doc["channels"] = filter.channels();
    doc["n_points"] = filter.n_points();
    doc["positions"] = rows(filter.positions(), filter.dim());
    doc["weights"] = rows(filter.weights(), filter.channels());
    doc["radii"] = std::vector<double>(filter.radii().begin(), filter.radii().end());
    doc["radius_min"] = filter.bounds().min;
    doc["radius_max"] = filter.bounds().max;
    return doc;
}

SmpFilter filter_from_json(const json& doc) {
    require(doc.is_object(), "checkpoint must be a JSON object");
    static const std::set<std::string> known = {"dim",   "channels", "n_points",   "positions",
                                                "weights", "radii",  "radius_min", "radius_max"};
    for (const auto& item : doc.items()) {
        require(known.count(item.key()) == 1, "unknown checkpoint field '" + item.key() + "'");
    }
    const std::size_t dim = read_count(doc, "dim");
    const std::size_t channels = read_count(doc, "channels");
    const std::size_t n = read_count(doc, "n_points");
    require(dim == 1 || dim == 2, "checkpoint dim must be 1 or 2");
    require(channels >= 1, "checkpoint channels must be >= 1");
    require(doc.contains("positions") && doc.contains("weights") && doc.contains("radii"),
            "checkpoint is missing positions, weights or radii");
    std::vector<double> positions = flatten(doc.at("positions"), n, dim, "positions");
    std::vector<double> weights = flatten(doc.at("weights"), n, channels, "weights");
    const json& r = doc.at("radii");
    require(r.is_array() && r.size() == n, "checkpoint field 'radii' must have n_points entries");
    std::vector<double> radii;
    for (const json& v : r) {
        require(v.is_number(), "checkpoint field 'radii' must be numeric");
        radii.push_back(v.get<double>());
    }
    RadiusBounds bounds{read_number(doc, "radius_min"), read_number(doc, "radius_max")};
    return SmpFilter(dim, channels, std::move(positions), std::move(weights), std::move(radii),
                     bounds);
}

void save_checkpoint(const SmpFilter& filter, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out << filter_to_json(filter).dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

SmpFilter load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ContractError("malformed checkpoint '" + path.string() + "': " + e.what());
    }
    try {
        return filter_from_json(doc);
    } catch (const ContractError& e) {
        throw ContractError("invalid checkpoint '" + path.string() + "': " + e.what());
    }
}

}  // namespace smp
