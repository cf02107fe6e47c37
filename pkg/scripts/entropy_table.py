"""Model entropies and the Grim Reaper's approach to 2 as the window widens."""
import math

from fbcsf.models import model_entropy

if __name__ == "__main__":
    print(f"line        {model_entropy('line'):.6f}")
    print(f"circle      {model_entropy('circle'):.6f}  (sqrt(2 pi/e) = {math.sqrt(2 * math.pi / math.e):.6f})")
    for w in (6.0, 8.0, 12.0, 16.0, 24.0):
        print(f"grim reaper window {w:5.1f}  {model_entropy('grim_reaper', w):.6f}")
