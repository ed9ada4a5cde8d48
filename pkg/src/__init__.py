# Marker for src package

