#pragma once
// Seeded synthetic inputs shared by property and acceptance tests.

#include <random>
#include <string>
#include <vector>

#include "datanexus/linkstore.hpp"

namespace testing_support {

// Links over a small id space so (from, to, method) groups collide often.
inline std::vector<datanexus::links::Link> random_links(std::mt19937_64& rng, std::size_t n) {
  using namespace datanexus;
  std::uniform_int_distribution<int> node(0, 5);
  std::uniform_int_distribution<int> small(0, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<links::Link> out;
  for (std::size_t i = 0; i < n; ++i) {
    links::Link l;
    l.from_id = "pub-" + std::to_string(node(rng));
    l.to_id = "ds-" + std::to_string(node(rng));
    l.from_category = Category::publication;
    l.to_category = Category::research_data;
    l.method = small(rng) % 2 ? links::LinkMethod::manual : links::LinkMethod::automatic;
    l.confidence = l.method == links::LinkMethod::manual ? 1.0 : (small(rng) == 0 ? 1.0 : unit(rng));
    l.label = links::classify_link_label(l.confidence);
    if (small(rng)) l.evidence_passage = "passage " + std::to_string(small(rng));
    const int entries = 1 + small(rng) % 3;
    for (int e = 0; e < entries; ++e) {
      links::ProvenanceEntry p;
      p.origin = "origin-" + std::to_string(small(rng));
      p.method = l.method;
      p.imported_at = datanexus::timestamp_from_ms(static_cast<std::int64_t>(small(rng)) * 1000);
      if (small(rng)) p.note = "note-" + std::to_string(small(rng));
      l.provenance.push_back(p);
    }
    l.id = links::make_link_id(l.from_id, l.to_id, l.method);
    out.push_back(std::move(l));
  }
  return out;
}

}  // namespace testing_support
