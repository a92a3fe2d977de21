///
/// \file pwhid.hpp
///
/// Umbrella header.
///
#ifndef PWHID_PWHID_HPP
#define PWHID_PWHID_HPP

#include <pwhid/tensor_core.hpp>
#include <pwhid/volterra.hpp>
#include <pwhid/sampling.hpp>
#include <pwhid/recovery.hpp>
#include <pwhid/identification.hpp>
#include <pwhid/io.hpp>

#endif /* PWHID_PWHID_HPP */
