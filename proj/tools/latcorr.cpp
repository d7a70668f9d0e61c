// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#include "latcorr/cli.hpp"

int main(int argc, char** argv) { return latcorr::cli::run(argc, argv); }
