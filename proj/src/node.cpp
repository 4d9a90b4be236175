#include "sdpf/node.hpp"

#include "sdpf/rng.hpp"

namespace sdpf {

NodeId owner_of(TargetId target, std::size_t node_count) {
  if (node_count == 0) throw RoutingError("owner_of with zero nodes");
  return static_cast<NodeId>(mix64(target) % node_count);
}

bool Node::seen(TargetId t, const Rid& rid) const {
  auto it = seen_.find(t);
  return it != seen_.end() && it->second.count(rid) != 0;
}

void Node::remember(TargetId t, const Rid& rid) {
  auto& set = seen_[t];
  if (!set.insert(rid).second) return;
  auto& fifo = seen_fifo_[t];
  fifo.push_back(rid);
  // Bounded filter: eviction only costs a redundant re-execution, which is
  // idempotent downstream; correctness never depends on this cache.
  if (fifo.size() > kSeenCapacity) {
    set.erase(fifo.front());
    fifo.pop_front();
  }
}

}  // namespace sdpf
