// Copyright 2026 The urnlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "urnlab/cli.hpp"

int main(int argc, char** argv) { return urnlab::cli::run(argc, argv); }
