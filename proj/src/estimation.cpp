#include "poolalloc/estimation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <unordered_map>

namespace poolalloc {

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t lineno)
{
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (quoted)
        throw CsvError(lineno, "unterminated quoted field");
    fields.push_back(std::move(cur));
    return fields;
}

std::string trim(std::string s)
{
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos)
        return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

// Reads header + rows; calls row(fields-by-column, line number) for each non-empty data line.
template <class RowFn>
void read_csv(std::istream& in, const std::vector<std::string>& required, RowFn&& row)
{
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::size_t> column(required.size());
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0)
            line.erase(0, 3);
        if (trim(line).empty())
            continue;
        auto fields = split_csv_line(line, lineno);
        for (auto& f : fields)
            f = trim(std::move(f));
        if (!have_header) {
            for (std::size_t r = 0; r < required.size(); ++r) {
                auto it = std::find(fields.begin(), fields.end(), required[r]);
                if (it == fields.end())
                    throw CsvError(lineno, "header is missing column '" + required[r] + "'");
                column[r] = static_cast<std::size_t>(it - fields.begin());
            }
            have_header = true;
            continue;
        }
        std::vector<std::string> picked(required.size());
        for (std::size_t r = 0; r < required.size(); ++r) {
            if (column[r] >= fields.size())
                throw CsvError(lineno, "expected at least " + std::to_string(column[r] + 1) + " fields, got " +
                                           std::to_string(fields.size()));
            picked[r] = fields[column[r]];
        }
        row(picked, lineno);
    }
}

std::int64_t parse_count(const std::string& s, const char* name, std::size_t lineno)
{
    std::int64_t v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc{} || ptr != end || s.empty())
        throw CsvError(lineno, std::string("field '") + name + "' is not an integer: '" + s + "'");
    if (v < 0)
        throw CsvError(lineno, std::string("field '") + name + "' is negative");
    return v;
}

std::unordered_map<std::string, std::size_t> index_categories(const std::vector<CategoryDecl>& categories)
{
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < categories.size(); ++i) {
        if (!index.emplace(categories[i].id, i).second)
            throw ValidationError("id unique", "duplicate category id '" + categories[i].id + "'");
    }
    return index;
}

} // namespace

ExposureEstimate estimate_exposure(const std::vector<InteractionRecord>& records,
                                   const std::vector<CategoryDecl>& categories)
{
    const std::size_t k = categories.size();
    const auto index = index_categories(categories);

    std::unordered_map<std::string, std::size_t> person_category;
    std::map<std::string, std::set<std::string>> events;
    for (const auto& r : records) {
        auto it = index.find(r.category_id);
        if (it == index.end())
            throw ValidationError("category declared", "record references undeclared category '" + r.category_id + "'");
        auto [pc, inserted] = person_category.emplace(r.person_id, it->second);
        if (!inserted && pc->second != it->second)
            throw ValidationError("person category consistent",
                                  "person '" + r.person_id + "' appears under more than one category");
        events[r.event_id].insert(r.person_id);
    }

    ExposureEstimate est;
    est.d = SquareMatrix(k);
    est.support = SquareMatrix(k);
    std::vector<double> count(k);
    for (const auto& [event, people] : events) {
        std::fill(count.begin(), count.end(), 0.0);
        for (const auto& person : people)
            count[person_category.at(person)] += 1.0;
        for (std::size_t i = 0; i < k; ++i) {
            if (count[i] == 0.0)
                continue;
            for (std::size_t j = 0; j < k; ++j)
                est.support(i, j) += count[i] * (count[j] - (i == j ? 1.0 : 0.0));
        }
    }

    std::vector<std::int64_t> seen(k, 0);
    for (const auto& [person, cat] : person_category)
        ++seen[cat];
    for (std::size_t i = 0; i < k; ++i) {
        const auto& c = categories[i];
        if (c.n <= 0 || seen[i] == 0)
            est.warnings.push_back("category '" + c.id + "' has no interaction records; row set to zero");
        if (seen[i] > c.n)
            est.warnings.push_back("category '" + c.id + "' has " + std::to_string(seen[i]) +
                                   " distinct people in records but n = " + std::to_string(c.n));
        if (c.n <= 0)
            continue;
        for (std::size_t j = 0; j < k; ++j)
            est.d(i, j) = est.support(i, j) / static_cast<double>(c.n);
    }
    return est;
}

PriorEstimate estimate_prior(const std::vector<TestRecord>& tests, const std::vector<CategoryDecl>& categories,
                             const PriorOptions& options)
{
    if (!std::isfinite(options.smoothing) || options.smoothing < 0.0)
        throw ValidationError("smoothing non-negative", "smoothing must be >= 0");
    const std::size_t k = categories.size();
    const auto index = index_categories(categories);
    for (const auto& [id, value] : options.overrides) {
        if (!index.contains(id))
            throw ValidationError("category declared", "override references undeclared category '" + id + "'");
    }

    std::set<std::string> labels;
    for (const auto& t : tests) {
        if (!index.contains(t.category_id))
            throw ValidationError("category declared", "test record references undeclared category '" + t.category_id + "'");
        if (t.positive > t.tested || t.positive < 0)
            throw ValidationError("positive <= tested", "test record has positive > tested");
        labels.insert(t.period_label);
    }
    std::set<std::string> window;
    for (auto it = labels.rbegin(); it != labels.rend() && window.size() < std::max<std::size_t>(options.window, 1); ++it)
        window.insert(*it);

    std::vector<double> pos(k, 0.0), tested(k, 0.0);
    for (const auto& t : tests) {
        if (!window.contains(t.period_label))
            continue;
        const auto i = index.at(t.category_id);
        pos[i] += static_cast<double>(t.positive);
        tested[i] += static_cast<double>(t.tested);
    }

    const double s = options.smoothing;
    auto rate = [s](double positives, double n) {
        const double denom = n + 2.0 * s;
        return denom > 0.0 ? (positives + s) / denom : 0.5;
    };
    double pooled_pos = 0.0, pooled_tested = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        pooled_pos += pos[i];
        pooled_tested += tested[i];
    }
    const double pooled = rate(pooled_pos, pooled_tested);

    PriorEstimate est;
    est.p.resize(k);
    est.pooled_fallback.assign(k, false);
    for (std::size_t i = 0; i < k; ++i) {
        const auto& id = categories[i].id;
        if (tested[i] == 0.0) {
            est.p[i] = pooled;
            est.pooled_fallback[i] = true;
            est.warnings.push_back("category '" + id + "' has no tests in the window; using pooled estimate");
        } else {
            est.p[i] = rate(pos[i], tested[i]);
        }
        if (auto ov = options.overrides.find(id); ov != options.overrides.end()) {
            if (!std::isfinite(ov->second) || ov->second < 0.0 || ov->second > 1.0)
                throw ValidationError("p out of range", "override for '" + id + "' outside [0,1]");
            est.p[i] = ov->second;
        }
    }
    return est;
}

std::vector<InteractionRecord> read_interactions_csv(std::istream& in)
{
    std::vector<InteractionRecord> out;
    read_csv(in, {"person_id", "category_id", "event_id"}, [&](const std::vector<std::string>& f, std::size_t lineno) {
        if (f[0].empty() || f[1].empty() || f[2].empty())
            throw CsvError(lineno, "empty person_id, category_id or event_id");
        out.push_back({f[0], f[1], f[2]});
    });
    return out;
}

std::vector<TestRecord> read_tests_csv(std::istream& in)
{
    std::vector<TestRecord> out;
    read_csv(in, {"category_id", "tested", "positive", "period_label"},
             [&](const std::vector<std::string>& f, std::size_t lineno) {
                 TestRecord r;
                 r.category_id = f[0];
                 if (r.category_id.empty())
                     throw CsvError(lineno, "empty category_id");
                 r.tested = parse_count(f[1], "tested", lineno);
                 r.positive = parse_count(f[2], "positive", lineno);
                 if (r.positive > r.tested)
                     throw CsvError(lineno, "positive exceeds tested");
                 r.period_label = f[3];
                 out.push_back(std::move(r));
             });
    return out;
}

json to_json(const EstimatedParameters& est)
{
    json cats = json::array();
    for (std::size_t i = 0; i < est.categories.size(); ++i) {
        const double p = i < est.prior.p.size() ? est.prior.p[i] : 0.0;
        cats.push_back(json{{"id", est.categories[i].id}, {"n", est.categories[i].n}, {"p", p}, {"v", 1.0}});
    }
    json warnings = json::array();
    for (const auto& w : est.exposure.warnings)
        warnings.push_back(w);
    for (const auto& w : est.prior.warnings)
        warnings.push_back(w);
    return json{
        {"categories", std::move(cats)},
        {"d", to_json(est.exposure.d)},
        {"support", to_json(est.exposure.support)},
        {"warnings", std::move(warnings)},
    };
}

} // namespace poolalloc
