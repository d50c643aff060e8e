#pragma once

#include "achords/centroid.hpp"
#include "achords/corpus.hpp"
#include "achords/embedding.hpp"
#include "achords/error.hpp"
#include "achords/explain.hpp"
#include "achords/gradcheck.hpp"
#include "achords/grassmann.hpp"
#include "achords/linalg.hpp"
#include "achords/lvq.hpp"
#include "achords/model_io.hpp"
#include "achords/pipeline.hpp"
#include "achords/subspace.hpp"
#include "achords/synthetic.hpp"
