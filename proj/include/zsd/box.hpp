// Copyright 2026 The zsdgen Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#ifndef ZSD_BOX_HPP
#define ZSD_BOX_HPP

namespace zsd {

// Axis-aligned rectangle in canvas units, x2 > x1 and y2 > y1.
struct BoxRect {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  [[nodiscard]] double width() const { return x2 - x1; }
  [[nodiscard]] double height() const { return y2 - y1; }
  [[nodiscard]] double area() const { return width() * height(); }
  [[nodiscard]] bool valid() const { return x2 > x1 && y2 > y1; }
};

// Intersection over union. Symmetric by construction: min/max commute.
double iou(const BoxRect& a, const BoxRect& b);

}  // namespace zsd

#endif  // ZSD_BOX_HPP
