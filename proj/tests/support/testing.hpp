#pragma once

// libtorch's logging header defines a glog-style CHECK that would shadow doctest's, so torch
// comes first and its macro is dropped before doctest defines its own.
#include <torch/torch.h>
#undef CHECK

#include <doctest.h>
