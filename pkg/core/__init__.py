# Motion Cluster - librairie
