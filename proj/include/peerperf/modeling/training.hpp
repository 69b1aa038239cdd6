#pragma once

// Assembling a training set from shared contributions plus the node's
// private records.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "peerperf/node/api.hpp"
#include "peerperf/records.hpp"
#include "peerperf/stores.hpp"

namespace peerperf::node {
class Node;
}

namespace peerperf::modeling {

using node::ValidityPolicy;

enum class RowSource { kLocalPrivate, kShared };

std::string_view to_string(RowSource s);

struct TrainingRow {
  Cid cid;
  RowSource source = RowSource::kShared;
  PerformanceRecord record;
};

// A row that could not be used, with the reason (error code name).
struct RowIssue {
  Cid cid;
  std::string problem;
};

struct TrainingSet {
  std::vector<TrainingRow> rows;
  std::vector<RowIssue> issues;
  AttributeFilter filter;
  ValidityPolicy policy = ValidityPolicy::kAny;

  // Header: cid,source,workload,framework,framework_version,machine_type,
  // node_count,input_size_bytes,runtime_ms
  std::string to_csv() const;
};

struct ContributionRef {
  Cid data_cid;
  Attributes attributes;
  bool available = false;
};

// What assembly needs from a node.
class DataAccess {
 public:
  virtual ~DataAccess() = default;
  virtual std::vector<ContributionRef> contributions(const AttributeFilter& filter, ValidityPolicy policy) = 0;
  // Local copy, or (when `fetch_missing`) a network fetch. nullopt when the
  // block cannot be obtained.
  virtual std::optional<Bytes> block(const Cid& cid, bool fetch_missing, bool pin) = 0;
  virtual std::vector<std::pair<Cid, Bytes>> private_blocks() = 0;
};

class NodeDataAccess : public DataAccess {
 public:
  explicit NodeDataAccess(node::Node& node) : node_(node) {}
  std::vector<ContributionRef> contributions(const AttributeFilter& filter, ValidityPolicy policy) override;
  std::optional<Bytes> block(const Cid& cid, bool fetch_missing, bool pin) override;
  std::vector<std::pair<Cid, Bytes>> private_blocks() override;

 private:
  node::Node& node_;
};

// Talks to a running node through its HTTP API.
class HttpDataAccess : public DataAccess {
 public:
  explicit HttpDataAccess(std::string api_address) : address_(std::move(api_address)) {}
  std::vector<ContributionRef> contributions(const AttributeFilter& filter, ValidityPolicy policy) override;
  std::optional<Bytes> block(const Cid& cid, bool fetch_missing, bool pin) override;
  std::vector<std::pair<Cid, Bytes>> private_blocks() override;

 private:
  std::string address_;
};

// Shared rows come first in log order, then private rows by cid. A cid
// seen twice is kept once (the shared copy). Rows that cannot be fetched,
// fail verification or break the record invariants are listed in `issues`.
TrainingSet assemble_training_set(DataAccess& access, const AttributeFilter& filter, ValidityPolicy policy,
                                  bool fetch_missing);

}  // namespace peerperf::modeling
