#include "trendcal/errors.hpp"

namespace trendcal {

namespace {

std::string describe_unreachable(const std::vector<std::string>& ids) {
    std::string msg = "graph is disconnected; " + std::to_string(ids.size()) +
                      " anchor(s) cannot be chained to the reference:";
    for (const auto& id : ids) msg += " " + id;
    msg += " (lower tau or add anchors)";
    return msg;
}

}  // namespace

DisconnectedGraphError::DisconnectedGraphError(std::vector<std::string> unreachable)
    : Error(describe_unreachable(unreachable)), unreachable_(std::move(unreachable)) {}

IrrecoverableHopError::IrrecoverableHopError(std::string lower, std::string upper)
    : Error("hop '" + lower + "' -> '" + upper + "' is irrecoverable: '" + lower +
            "' rounds to zero next to '" + upper + "' (the anchor subset is too sparse)"),
      lower_(std::move(lower)),
      upper_(std::move(upper)) {}

}  // namespace trendcal
