"""Reference threshold table for the 15-member family (n = 0..14).

The n = 10 row is labelled 4/5 in the source table; its position and values
belong to rate 8/20 = 2/5, which is how it is used here.
"""

from fractions import Fraction

RATES = [Fraction(8, 10 + n) for n in range(15)]
THRESHOLD_DB = [2.386, 1.994, 1.554, 1.166, 0.919, 0.707, 0.494, 0.450, 0.244, 0.164,
                0.054, 0.021, -0.090, -0.148, -0.204]
CAPACITY_DB = [2.040, 1.461, 1.059, 0.760, 0.526, 0.326, 0.188, 0.055, -0.064, -0.150,
               -0.236, -0.310, -0.390, -0.442, -0.507]
GAP_DB = [0.346, 0.533, 0.495, 0.406, 0.393, 0.381, 0.306, 0.395, 0.308, 0.314,
          0.290, 0.331, 0.300, 0.294, 0.303]
