// Copyright 2026 The MoralBench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace moral::acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
  std::vector<std::string> trace;  // extra lines printed under the verdict
};

// Sequential training on two synthetic QA tasks with disjoint vocabularies
// and with a four-expert mixture at a matched parameter budget, five seeds.
Outcome forgetting_experiment();

// Trains on open-book and closed-book prompts for facts whose answers sit
// verbatim in their golden chunk, then compares RA-open and RA-closed on
// held-out facts.
Outcome open_book_experiment();

}  // namespace moral::acceptance
