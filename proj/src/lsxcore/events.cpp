// SPDX-License-Identifier: Apache-2.0
#include <sstream>

#include "lsx/lsx.hpp"

namespace lsx::core {

std::string format_events(const std::vector<Event>& events) {
  std::ostringstream os;
  for (const auto& e : events) {
    os << e.iteration << ' ' << e.module;
    if (!e.detail.empty()) os << ' ' << e.detail;
    os << '\n';
  }
  return os.str();
}

std::vector<Event> parse_events(const std::string& text) {
  std::vector<Event> out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    // '#' lines carry run metadata such as dataset hashes.
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Event e;
    if (!(ls >> e.iteration >> e.module)) throw std::runtime_error("events.log line " + std::to_string(lineno) + ": malformed");
    std::string rest;
    std::getline(ls, rest);
    if (!rest.empty() && rest[0] == ' ') rest.erase(0, 1);
    e.detail = rest;
    out.push_back(std::move(e));
  }
  return out;
}

bool events_follow_loop(const std::vector<Event>& events, Instantiation inst) {
  std::size_t i = 0;
  if (i >= events.size() || events[i].module != "fit" || events[i].iteration != 0) return false;
  ++i;
  std::size_t t = 0;
  while (i < events.size() && events[i].module == "explain") {
    ++t;
    for (const char* m : {"explain", "reflect", "revise"}) {
      if (i >= events.size() || events[i].module != m || events[i].iteration != t) return false;
      ++i;
    }
    if (i < events.size() && events[i].module == "converged") {
      if (events[i].iteration != t) return false;
      ++i;
      break;
    }
  }
  if (t == 0) return false;
  if (inst == Instantiation::cnn) {
    if (i >= events.size() || events[i].module != "finetune_lock") return false;
    ++i;
  }
  return i == events.size();
}

}  // namespace lsx::core
