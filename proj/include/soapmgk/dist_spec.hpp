#pragma once

#include "soapmgk/distribution.hpp"

#include <string>

namespace soapmgk {

/// Parse a distribution spec such as "exp(rate=1)" or
/// "hyperexp(p=0.9:0.1,mu=2:0.05)". An optional classes=... argument
/// replaces the family's default class declarations, e.g.
/// "pareto(xm=1,alpha=1.5,classes=or:1.5:1.5)". Throws ParseError.
SizeDistribution parse_distribution(const std::string& spec);

/// Parse a class list like "or:2:3+enbue+qdhr:1".
ClassSet parse_classes(const std::string& text);

}  // namespace soapmgk
