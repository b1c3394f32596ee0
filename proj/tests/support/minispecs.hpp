#pragma once

// Small hand-built networks for engine unit tests.

#include "qnet/model.hpp"

namespace qnet::testing {

// One station, one class routed straight to the exit.
inline NetworkSpec single_station(Discipline d, ServiceLaw law, ArrivalLaw arr) {
    NetworkSpec s;
    s.M = 10;
    s.delta = 0.5;
    s.classes.push_back({1, "1", 1, std::move(law), kExit, 1});
    s.stations.push_back({1, "S", d, {1}});
    s.sources.push_back({1, std::move(arr)});
    s.validate();
    return s;
}

// One station shared by two independent classes, each fed externally.
inline NetworkSpec two_class_station(Discipline d, ServiceLaw law_a, ServiceLaw law_b,
                                     ArrivalLaw arr_a, ArrivalLaw arr_b) {
    NetworkSpec s;
    s.M = 10;
    s.delta = 0.5;
    s.classes.push_back({1, "1", 1, std::move(law_a), kExit, 1});
    s.classes.push_back({2, "2", 1, std::move(law_b), kExit, 2});
    s.stations.push_back({1, "S", d, {1, 2}});
    s.sources.push_back({1, std::move(arr_a)});
    s.sources.push_back({2, std::move(arr_b)});
    s.validate();
    return s;
}

}  // namespace qnet::testing
