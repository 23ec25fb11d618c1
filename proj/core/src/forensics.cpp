#include "fnns/forensics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "fnns/error.hpp"

namespace fnns {

namespace {

std::vector<std::string> registry_ordered(std::vector<std::string> ids) {
  std::stable_sort(ids.begin(), ids.end(), [](const std::string& a, const std::string& b) {
    const auto ra = profile_rank(a), rb = profile_rank(b);
    if (ra != rb) return ra < rb;
    return a < b;
  });
  return ids;
}

}  // namespace

std::string class_label(std::size_t index) {
  std::string s;
  std::size_t n = index + 1;
  while (n > 0) {
    --n;
    s.insert(s.begin(), static_cast<char>('A' + n % 26));
    n /= 26;
  }
  return s;
}

std::size_t EquivalenceReport::class_of(const std::string& subject) const {
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (std::find(classes[c].begin(), classes[c].end(), subject) != classes[c].end()) return c;
  }
  throw LookupError("subject '" + subject + "' not in report");
}

const OutputDigest& EquivalenceReport::digest_of(const std::string& subject) const {
  auto it = std::find(subjects.begin(), subjects.end(), subject);
  if (it == subjects.end()) throw LookupError("subject '" + subject + "' not in report");
  return digests[static_cast<std::size_t>(it - subjects.begin())];
}

EquivalenceReport partition_digests(const std::map<std::string, OutputDigest>& digests) {
  if (digests.empty()) throw std::invalid_argument("partition needs at least one output");
  std::vector<std::string> ids;
  for (const auto& [id, _] : digests) ids.push_back(id);

  EquivalenceReport r;
  r.subjects = registry_ordered(std::move(ids));
  std::vector<OutputDigest> class_digest;
  for (const auto& s : r.subjects) {
    const auto& d = digests.at(s);
    r.digests.push_back(d);
    auto it = std::find(class_digest.begin(), class_digest.end(), d);
    if (it == class_digest.end()) {
      class_digest.push_back(d);
      r.classes.push_back({s});
    } else {
      r.classes[static_cast<std::size_t>(it - class_digest.begin())].push_back(s);
    }
  }
  return r;
}

EquivalenceReport partition(const std::map<std::string, Tensor>& outputs) {
  if (outputs.empty()) throw std::invalid_argument("partition needs at least one output");
  const Shape& shape = outputs.begin()->second.shape();
  std::map<std::string, OutputDigest> digests;
  for (const auto& [id, t] : outputs) {
    if (t.shape() != shape) {
      throw ShapeError("output of '" + id + "' has shape " + shape_to_string(t.shape()) + ", expected " +
                       shape_to_string(shape));
    }
    digests.emplace(id, digest(t));
  }
  return partition_digests(digests);
}

EquivalenceReport partition_profiles(const Model& model, const Tensor& input,
                                     const std::vector<ExecProfile>& profiles) {
  std::map<std::string, Tensor> outputs;
  for (const auto& p : profiles) outputs.emplace(p.id, forward(model, input, p));
  return partition(outputs);
}

std::string render_report(const EquivalenceReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "profile" << std::setw(7) << "class" << "digest\n";
  for (std::size_t i = 0; i < report.subjects.size(); ++i) {
    const auto& s = report.subjects[i];
    out << std::setw(10) << s << std::setw(7) << class_label(report.class_of(s))
        << report.digests[i].hex().substr(0, 16) << "\n";
  }
  out << report.class_count() << (report.class_count() == 1 ? " class\n" : " classes\n");
  return out.str();
}

// --- fingerprint db --------------------------------------------------------

void FingerprintDB::enroll(const FingerprintKey& key, const OutputDigest& d, bool overwrite) {
  auto [it, inserted] = records_.try_emplace(key, d);
  if (inserted) return;
  if (!overwrite) {
    throw std::invalid_argument("fingerprint for (" + key.model + ", " + key.input + ", " + key.profile +
                                ") already enrolled");
  }
  it->second = d;
}

std::optional<OutputDigest> FingerprintDB::lookup(const FingerprintKey& key) const {
  auto it = records_.find(key);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> FingerprintDB::identify(const std::string& model, const std::string& input,
                                                 const Tensor& observed) const {
  return identify(model, input, digest(observed));
}

std::vector<std::string> FingerprintDB::identify(const std::string& model, const std::string& input,
                                                 const OutputDigest& observed) const {
  bool any = false;
  std::vector<std::string> hits;
  for (auto it = records_.lower_bound({model, input, ""}); it != records_.end(); ++it) {
    if (it->first.model != model || it->first.input != input) break;
    any = true;
    if (it->second == observed) hits.push_back(it->first.profile);
  }
  if (!any) throw LookupError("no fingerprints enrolled for model '" + model + "', input '" + input + "'");
  return registry_ordered(std::move(hits));
}

// --- sweep -----------------------------------------------------------------

std::vector<SweepColumn> complexity_sweep(const std::vector<MockSpec>& specs,
                                          const std::vector<ExecProfile>& profiles, const Tensor& input) {
  std::vector<SweepColumn> columns;
  for (const auto& spec : specs) {
    const Model m = build_mock(spec, input.shape());
    columns.push_back({spec, partition_profiles(m, input, profiles)});
  }
  return columns;
}

std::string render_sweep(const std::vector<SweepColumn>& sweep) {
  std::ostringstream out;
  if (sweep.empty()) return "";
  std::vector<std::size_t> width;
  out << std::left << std::setw(10) << "profile";
  for (const auto& col : sweep) {
    width.push_back(std::max<std::size_t>(col.spec.name().size() + 2, 6));
    out << std::setw(static_cast<int>(width.back())) << col.spec.name();
  }
  out << "\n";
  for (const auto& subject : sweep.front().report.subjects) {
    out << std::setw(10) << subject;
    for (std::size_t c = 0; c < sweep.size(); ++c) {
      out << std::setw(static_cast<int>(width[c])) << class_label(sweep[c].report.class_of(subject));
    }
    out << "\n";
  }
  out << std::setw(10) << "classes";
  for (std::size_t c = 0; c < sweep.size(); ++c) {
    out << std::setw(static_cast<int>(width[c])) << sweep[c].report.class_count();
  }
  out << "\n";
  return out.str();
}

}  // namespace fnns
